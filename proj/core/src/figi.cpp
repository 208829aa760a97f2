#include "fundbasket/errors.hpp"
#include "fundbasket/ingest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace fundbasket::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Composite and venue codes for US exchanges plus the US OTC tiers.
constexpr std::array<std::string_view, 14> kUsExchangeCodes = {
    "US", "UN", "UW", "UQ", "UR", "UA", "UP", "UF", "UV", "UD", "UT", "UX", "PQ", "UU"};

std::string json_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return {};
    return it->get<std::string>();
}

}  // namespace

bool is_us_exchange_code(std::string_view code) {
    return std::find(kUsExchangeCodes.begin(), kUsExchangeCodes.end(), code) != kUsExchangeCodes.end();
}

SecurityMeta meta_from_figi(const std::string& cusip, const std::string& element_json) {
    SecurityMeta meta;
    meta.cusip = cusip;
    const auto element = json::parse(element_json);
    if (element.contains("error")) {
        meta.status = ResolveStatus::Failed;
        return meta;
    }
    if (!element.contains("data") || !element.at("data").is_array() || element.at("data").empty()) {
        meta.status = ResolveStatus::NoMatch;
        return meta;
    }

    // Prefer the US composite listing, then any US venue, then the first hit.
    const auto& data = element.at("data");
    const json* pick = &data.front();
    int best = 0;
    for (const auto& d : data) {
        const auto code = json_string(d, "exchCode");
        const int rank = code == "US" ? 2 : is_us_exchange_code(code) ? 1 : 0;
        if (rank > best) {
            best = rank;
            pick = &d;
        }
    }
    meta.status = ResolveStatus::Matched;
    meta.exchange_code = json_string(*pick, "exchCode");
    meta.is_us_listed = is_us_exchange_code(meta.exchange_code);
    meta.security_type = json_string(*pick, "securityType");
    if (meta.security_type.empty()) meta.security_type = json_string(*pick, "securityType2");
    if (auto t = json_string(*pick, "ticker"); !t.empty()) meta.ticker = t;
    if (auto f = json_string(*pick, "compositeFIGI"); !f.empty()) meta.composite_figi = f;
    return meta;
}

FigiClient::FigiClient(http::Transport& transport, FigiOptions options)
    : transport_(transport), options_(std::move(options)), limiter_(options_.requests_per_second) {
    if (options_.batch_size == 0 || options_.batch_size > 100)
        throw ConfigError("OpenFIGI batch size must be in [1, 100]");
}

EnrichOutcome FigiClient::enrich(const std::set<std::string>& cusips) {
    EnrichOutcome outcome;
    const auto dir = options_.cache_dir / "figi";
    std::vector<std::string> pending;

    for (const auto& cusip : cusips) {
        const auto path = dir / (cusip + ".json");
        if (!fs::exists(path)) {
            pending.push_back(cusip);
            continue;
        }
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        if (!json::accept(ss.str())) throw CacheError("corrupt cache entry " + path.string());
        outcome.meta[cusip] = meta_from_figi(cusip, ss.str());
    }

    for (std::size_t start = 0; start < pending.size(); start += options_.batch_size) {
        const auto end = std::min(pending.size(), start + options_.batch_size);
        json jobs = json::array();
        for (auto k = start; k < end; ++k) jobs.push_back({{"idType", "ID_CUSIP"}, {"idValue", pending[k]}});

        http::Request req;
        req.method = "POST";
        req.url = options_.url;
        req.headers["Content-Type"] = "application/json";
        if (!options_.api_key.empty()) req.headers["X-OPENFIGI-APIKEY"] = options_.api_key;
        req.body = jobs.dump();
        ++outcome.network_requests;
        const auto resp = http::send_with_retry(transport_, req, options_.retry, &limiter_);

        json results;
        bool usable = resp.ok() && json::accept(resp.body);
        if (usable) {
            results = json::parse(resp.body);
            usable = results.is_array() && results.size() == end - start;
        }
        for (auto k = start; k < end; ++k) {
            const auto& cusip = pending[k];
            if (!usable) {
                outcome.meta[cusip] = SecurityMeta{cusip, {}, false, {}, {}, {}, ResolveStatus::Failed};
                ++outcome.failed;
                continue;
            }
            const auto element = results[k - start].dump();
            auto meta = meta_from_figi(cusip, element);
            if (meta.status == ResolveStatus::Failed) {
                ++outcome.failed;
            } else {
                fs::create_directories(dir);
                std::ofstream out(dir / (cusip + ".json"), std::ios::binary | std::ios::trunc);
                out << element;
            }
            outcome.meta[cusip] = std::move(meta);
        }
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Filters

FilterResult apply_filters(const std::vector<HoldingRecord>& records,
                           const std::map<std::string, SecurityMeta>& meta) {
    FilterResult out;
    out.counts.input = records.size();
    for (const auto& r : records) {
        if (!is_valid_cusip(r.cusip)) {
            ++out.counts.invalid_cusip;
            continue;
        }
        auto it = meta.find(r.cusip);
        if (it == meta.end() || !it->second.resolved() || !it->second.is_us_listed) {
            ++out.counts.not_us_listed;
            continue;
        }
        if (it->second.security_type != kCommonStock) {
            ++out.counts.not_common_stock;
            continue;
        }
        if (r.payoff_profile != PayoffProfile::Long) {
            ++out.counts.not_long;
            continue;
        }
        if (!(r.value_usd >= kMinPositionUsd)) {
            ++out.counts.below_min_value;
            continue;
        }
        out.records.push_back(r);
    }
    out.counts.retained = out.records.size();
    return out;
}

std::vector<HoldingRow> to_holding_rows(const std::vector<HoldingRecord>& records,
                                        const std::map<std::string, SecurityMeta>& meta) {
    std::map<std::pair<std::string, int>, double> totals;
    for (const auto& r : records) totals[{r.fund_id, r.quarter.ordinal()}] += r.value_usd;

    std::vector<HoldingRow> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        HoldingRow row;
        row.fund_id = r.fund_id;
        row.cusip = r.cusip;
        if (auto it = meta.find(r.cusip); it != meta.end() && it->second.ticker) row.ticker = *it->second.ticker;
        row.quarter = r.quarter;
        row.value_usd = r.value_usd;
        const double total = totals.at({r.fund_id, r.quarter.ordinal()});
        row.weight = total > 0 ? r.value_usd / total : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace fundbasket::ingest
