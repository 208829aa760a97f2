#include "fundbasket/errors.hpp"
#include "fundbasket/ingest.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <sstream>

namespace fundbasket::ingest {

namespace pt = boost::property_tree;

namespace {

std::string_view local_name(std::string_view tag) {
    auto colon = tag.rfind(':');
    return colon == std::string_view::npos ? tag : tag.substr(colon + 1);
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

const pt::ptree* child(const pt::ptree& node, std::string_view name) {
    for (const auto& [tag, sub] : node)
        if (local_name(tag) == name) return &sub;
    return nullptr;
}

/// First descendant (depth-first) with the given local name.
const pt::ptree* find_descendant(const pt::ptree& node, std::string_view name) {
    for (const auto& [tag, sub] : node) {
        if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
        if (local_name(tag) == name) return &sub;
        if (const auto* hit = find_descendant(sub, name)) return hit;
    }
    return nullptr;
}

std::optional<std::string> text_of(const pt::ptree& node, std::string_view name) {
    const auto* c = child(node, name);
    if (!c) return std::nullopt;
    auto v = trim(c->data());
    if (v.empty()) return std::nullopt;
    return v;
}

std::optional<double> number_of(const pt::ptree& node, std::string_view name) {
    auto t = text_of(node, name);
    if (!t) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t->data(), t->data() + t->size(), v);
    if (ec != std::errc{} || ptr != t->data() + t->size()) return std::nullopt;
    return v;
}

}  // namespace

PayoffProfile parse_payoff(std::string_view text) {
    std::string lower;
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "long") return PayoffProfile::Long;
    if (lower == "short") return PayoffProfile::Short;
    return PayoffProfile::NA;
}

std::string_view to_string(PayoffProfile p) {
    switch (p) {
        case PayoffProfile::Long: return "Long";
        case PayoffProfile::Short: return "Short";
        case PayoffProfile::NA: break;
    }
    return "N/A";
}

bool is_valid_cusip(std::string_view cusip) {
    if (cusip.size() != 9) return false;
    if (!std::all_of(cusip.begin(), cusip.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); }))
        return false;
    return cusip != "000000000";
}

ParsedFiling parse_nport(const RawFiling& filing) {
    pt::ptree doc;
    try {
        std::istringstream in(filing.body);
        pt::read_xml(in, doc);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(filing.accession_id, std::string("malformed XML: ") + e.message() + " at line " +
                                                  std::to_string(e.line()));
    }

    const pt::ptree* root = nullptr;
    for (const auto& [tag, sub] : doc)
        if (local_name(tag) == "edgarSubmission") root = &sub;
    if (!root) throw ParseError(filing.accession_id, "missing <edgarSubmission> root");

    ParsedFiling out;
    out.accession_id = filing.accession_id;
    out.cik = filing.cik;
    out.filed_date = filing.filed_date;
    out.quarter = filing.report_quarter;

    const auto* gen_info = find_descendant(*root, "genInfo");
    if (gen_info) {
        if (auto d = text_of(*gen_info, "repPdDate")) out.quarter = Quarter::from_date(*d);
        if (auto s = text_of(*gen_info, "seriesId")) out.fund_id = *s;
    }
    if (out.fund_id.empty()) {
        if (const auto* s = find_descendant(*root, "seriesId")) out.fund_id = trim(s->data());
    }
    if (out.fund_id.empty()) out.fund_id = filing.cik;

    const auto* holdings = find_descendant(*root, "invstOrSecs");
    if (!holdings) return out;

    for (const auto& [tag, entry] : *holdings) {
        if (local_name(tag) != "invstOrSec") continue;
        auto cusip = text_of(entry, "cusip");
        if (!cusip || !is_valid_cusip(*cusip)) {
            ++out.dropped_invalid_cusip;
            continue;
        }
        auto value = number_of(entry, "valUSD");
        auto balance = number_of(entry, "balance");
        if (!value || !balance) {
            ++out.skipped_missing_fields;
            continue;
        }
        HoldingRecord rec;
        rec.fund_id = out.fund_id;
        rec.cusip = *cusip;
        rec.name = text_of(entry, "name").value_or("");
        rec.balance = *balance;
        rec.value_usd = *value;
        rec.payoff_profile = parse_payoff(text_of(entry, "payoffProfile").value_or(""));
        rec.quarter = out.quarter;
        out.records.push_back(std::move(rec));
    }
    return out;
}

std::string render_nport(const ParsedFiling& parsed) {
    pt::ptree doc;
    auto& root = doc.add("edgarSubmission", "");
    root.put("<xmlattr>.xmlns", "http://www.sec.gov/edgar/nport");
    root.put("headerData.submissionType", "NPORT-P");
    auto& gen = root.add("formData.genInfo", "");
    gen.put("regCik", parsed.cik);
    gen.put("seriesId", parsed.fund_id);
    // Last day of the quarter.
    static constexpr const char* kQuarterEnd[] = {"03-31", "06-30", "09-30", "12-31"};
    gen.put("repPdDate", fmt::format("{}-{}", parsed.quarter.year(), kQuarterEnd[parsed.quarter.q() - 1]));
    auto& secs = root.get_child("formData").add("invstOrSecs", "");
    for (const auto& r : parsed.records) {
        auto& e = secs.add("invstOrSec", "");
        e.put("name", r.name);
        e.put("cusip", r.cusip);
        e.put("balance", fmt::format("{:.17g}", r.balance));
        e.put("valUSD", fmt::format("{:.17g}", r.value_usd));
        e.put("payoffProfile", std::string(to_string(r.payoff_profile)));
    }
    std::ostringstream out;
    pt::write_xml(out, doc, pt::xml_writer_make_settings<std::string>(' ', 2));
    return out.str();
}

std::vector<ParsedFiling> latest_per_fund_quarter(std::vector<ParsedFiling> filings) {
    std::map<std::pair<std::string, int>, ParsedFiling> latest;
    for (auto& f : filings) {
        auto key = std::make_pair(f.fund_id, f.quarter.ordinal());
        auto it = latest.find(key);
        if (it == latest.end()) {
            latest.emplace(key, std::move(f));
            continue;
        }
        const auto& cur = it->second;
        if (std::tie(f.filed_date, f.accession_id) > std::tie(cur.filed_date, cur.accession_id))
            it->second = std::move(f);
    }
    std::vector<ParsedFiling> out;
    out.reserve(latest.size());
    for (auto& [key, f] : latest) out.push_back(std::move(f));
    return out;
}

}  // namespace fundbasket::ingest
