#include "fundbasket/errors.hpp"
#include "fundbasket/ingest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace fundbasket::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<std::string> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& body) {
    fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".part";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CacheError("cannot write cache file " + tmp.string());
        out << body;
        if (!out) throw CacheError("cannot write cache file " + tmp.string());
    }
    fs::rename(tmp, path);
}

bool looks_like_xml(const std::string& body) {
    auto pos = body.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
    return pos != std::string::npos && body[pos] == '<';
}

bool looks_like_json(const std::string& body) {
    return json::accept(body);
}

struct IndexEntry {
    std::string accession;
    std::string form;
    std::string report_date;
    std::string filed_date;
};

// Columnar "recent" block: parallel arrays keyed by field name.
void collect_entries(const json& block, std::vector<IndexEntry>& out) {
    const auto& acc = block.at("accessionNumber");
    for (std::size_t k = 0; k < acc.size(); ++k) {
        IndexEntry e;
        e.accession = acc[k].get<std::string>();
        e.form = block.at("form")[k].get<std::string>();
        e.report_date = block.at("reportDate")[k].get<std::string>();
        e.filed_date = block.at("filingDate")[k].get<std::string>();
        out.push_back(std::move(e));
    }
}

std::string strip_dashes(std::string s) {
    s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
    return s;
}

std::string cik_as_int(const std::string& padded) {
    auto pos = padded.find_first_not_of('0');
    return pos == std::string::npos ? "0" : padded.substr(pos);
}

}  // namespace

std::string normalize_cik(std::string_view cik) {
    std::string digits;
    for (char c : cik)
        if (c >= '0' && c <= '9') digits.push_back(c);
    if (digits.empty() || digits.size() > 10) throw DataError("invalid CIK '" + std::string(cik) + "'");
    return std::string(10 - digits.size(), '0') + digits;
}

EdgarClient::EdgarClient(http::Transport& transport, EdgarOptions options)
    : transport_(transport), options_(std::move(options)), limiter_(options_.requests_per_second) {}

std::optional<std::string> EdgarClient::get_cached(const fs::path& path, const std::string& url,
                                                   FetchOutcome& outcome, FetchError err) {
    const bool is_xml = path.extension() == ".xml";
    if (fs::exists(path)) {
        auto body = read_file(path);
        if (!body || !(is_xml ? looks_like_xml(*body) : looks_like_json(*body)))
            throw CacheError("corrupt cache entry " + path.string());
        return body;
    }

    http::Request req;
    req.url = url;
    req.headers["User-Agent"] = options_.user_agent;
    req.headers["Accept-Encoding"] = "identity";
    ++outcome.network_requests;
    auto resp = http::send_with_retry(transport_, req, options_.retry, &limiter_);
    if (!resp.ok()) {
        err.url = url;
        err.status = resp.status;
        err.message = resp.error.empty() ? "HTTP " + std::to_string(resp.status) : resp.error;
        outcome.errors.push_back(std::move(err));
        return std::nullopt;
    }
    if (!(is_xml ? looks_like_xml(resp.body) : looks_like_json(resp.body))) {
        err.url = url;
        err.status = resp.status;
        err.message = "unexpected response body";
        outcome.errors.push_back(std::move(err));
        return std::nullopt;
    }
    write_file_atomic(path, resp.body);
    return resp.body;
}

FetchOutcome EdgarClient::fetch_filings(const std::set<std::string>& ciks, const QuarterRange& window) {
    if (window.empty()) throw ConfigError("fetch_filings: empty study window");
    FetchOutcome outcome;
    std::set<std::string> seen;
    const auto edgar_dir = options_.cache_dir / "edgar";

    for (const auto& raw_cik : ciks) {
        const auto cik = normalize_cik(raw_cik);
        const auto index_name = "CIK" + cik + ".json";
        auto index_body = get_cached(edgar_dir / "submissions" / index_name,
                                     options_.submissions_base + "/" + index_name, outcome, FetchError{cik, {}, {}, 0, {}});
        if (!index_body) continue;

        std::vector<IndexEntry> entries;
        try {
            auto index = json::parse(*index_body);
            const auto& filings = index.at("filings");
            collect_entries(filings.at("recent"), entries);
            if (filings.contains("files")) {
                for (const auto& page : filings.at("files")) {
                    const auto name = page.at("name").get<std::string>();
                    auto page_body = get_cached(edgar_dir / "submissions" / name, options_.submissions_base + "/" + name,
                                                outcome, FetchError{cik, {}, {}, 0, {}});
                    if (page_body) collect_entries(json::parse(*page_body), entries);
                }
            }
        } catch (const json::exception& e) {
            throw CacheError("submissions index for CIK " + cik + " has unexpected shape: " + e.what());
        }

        for (const auto& e : entries) {
            if (e.form != "NPORT-P" && e.form != "NPORT-P/A") continue;
            if (e.report_date.empty()) continue;
            const auto quarter = Quarter::from_date(e.report_date);
            if (!window.contains(quarter)) continue;
            if (!seen.insert(e.accession).second) continue;

            const auto url = options_.archives_base + "/" + cik_as_int(cik) + "/" + strip_dashes(e.accession) +
                             "/primary_doc.xml";
            auto body = get_cached(edgar_dir / (e.accession + ".xml"), url, outcome,
                                   FetchError{cik, e.accession, {}, 0, {}});
            if (!body) continue;
            outcome.filings.push_back({e.accession, cik, quarter, e.filed_date, std::move(*body)});
        }
    }

    std::sort(outcome.filings.begin(), outcome.filings.end(), [](const RawFiling& a, const RawFiling& b) {
        return std::tie(a.cik, a.report_quarter, a.accession_id) < std::tie(b.cik, b.report_quarter, b.accession_id);
    });
    return outcome;
}

}  // namespace fundbasket::ingest
