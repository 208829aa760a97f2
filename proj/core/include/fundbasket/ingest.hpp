#pragma once

#include "fundbasket/dataset.hpp"
#include "fundbasket/http.hpp"
#include "fundbasket/quarter.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fundbasket::ingest {

// ---------------------------------------------------------------------------
// Records

struct RawFiling {
    std::string accession_id;
    std::string cik;
    Quarter report_quarter;
    /// ISO date the filing was accepted; used to pick the latest amendment.
    std::string filed_date;
    std::string body;
};

enum class PayoffProfile { Long, Short, NA };

PayoffProfile parse_payoff(std::string_view text);
std::string_view to_string(PayoffProfile p);

struct HoldingRecord {
    std::string fund_id;
    std::string cusip;
    std::string name;
    double balance = 0.0;
    double value_usd = 0.0;
    PayoffProfile payoff_profile = PayoffProfile::NA;
    Quarter quarter;

    bool operator==(const HoldingRecord&) const = default;
};

/// Nine alphanumeric characters and not an all-zero placeholder.
bool is_valid_cusip(std::string_view cusip);

// ---------------------------------------------------------------------------
// EDGAR

struct FetchError {
    std::string cik;
    std::string accession_id;  // empty when the submissions index failed
    std::string url;
    int status = 0;
    std::string message;
};

struct FetchOutcome {
    std::vector<RawFiling> filings;
    std::vector<FetchError> errors;
    std::size_t network_requests = 0;
};

struct EdgarOptions {
    std::filesystem::path cache_dir = "cache";
    /// SEC fair-access policy requires a descriptive agent with contact.
    std::string user_agent = "fundbasket research tool admin@example.com";
    double requests_per_second = 10.0;
    http::RetryPolicy retry;
    std::string submissions_base = "https://data.sec.gov/submissions";
    std::string archives_base = "https://www.sec.gov/Archives/edgar/data";
};

/// Cache layout: `<cache_dir>/edgar/<accession_id>.xml` for documents and
/// `<cache_dir>/edgar/submissions/CIK##########.json` for the filing index.
class EdgarClient {
public:
    EdgarClient(http::Transport& transport, EdgarOptions options);

    /// Every NPORT-P (or amendment) whose period of report falls in `window`,
    /// once each. Warm caches are served without touching the network.
    FetchOutcome fetch_filings(const std::set<std::string>& ciks, const QuarterRange& window);

private:
    std::optional<std::string> get_cached(const std::filesystem::path& path, const std::string& url,
                                          FetchOutcome& outcome, FetchError err);

    http::Transport& transport_;
    EdgarOptions options_;
    http::RateLimiter limiter_;
};

/// Zero-padded ten-digit CIK.
std::string normalize_cik(std::string_view cik);

// ---------------------------------------------------------------------------
// Parsing

struct ParsedFiling {
    std::string accession_id;
    std::string cik;
    std::string fund_id;
    std::string filed_date;
    Quarter quarter;
    std::vector<HoldingRecord> records;
    std::size_t dropped_invalid_cusip = 0;
    std::size_t skipped_missing_fields = 0;
};

/// One HoldingRecord per <invstOrSec> carrying a valid CUSIP. Throws
/// ParseError naming the accession on malformed XML.
ParsedFiling parse_nport(const RawFiling& filing);

/// Minimal NPORT-P document that parse_nport maps back to `parsed`.
std::string render_nport(const ParsedFiling& parsed);

/// Latest-filed accession per (fund, quarter); ties go to the larger
/// accession id.
std::vector<ParsedFiling> latest_per_fund_quarter(std::vector<ParsedFiling> filings);

// ---------------------------------------------------------------------------
// OpenFIGI

enum class ResolveStatus { Matched, NoMatch, Failed };

struct SecurityMeta {
    std::string cusip;
    std::optional<std::string> ticker;
    bool is_us_listed = false;
    std::string security_type;
    std::optional<std::string> composite_figi;
    std::string exchange_code;
    ResolveStatus status = ResolveStatus::Failed;

    bool resolved() const { return status == ResolveStatus::Matched; }
};

/// Bloomberg exchange codes treated as US venues (exchanges and OTC).
bool is_us_exchange_code(std::string_view code);

/// Interprets one element of an OpenFIGI mapping response.
SecurityMeta meta_from_figi(const std::string& cusip, const std::string& element_json);

struct FigiOptions {
    std::filesystem::path cache_dir = "cache";
    std::string url = "https://api.openfigi.com/v3/mapping";
    std::string api_key;
    std::size_t batch_size = 100;
    double requests_per_second = 4.0;
    http::RetryPolicy retry{8, std::chrono::milliseconds(1000), {}};
};

struct EnrichOutcome {
    std::map<std::string, SecurityMeta> meta;
    std::size_t network_requests = 0;
    std::size_t failed = 0;
};

/// Cache layout: `<cache_dir>/figi/<cusip>.json` holding the raw response
/// element. Permanent failures are reported unresolved and not cached.
class FigiClient {
public:
    FigiClient(http::Transport& transport, FigiOptions options);
    EnrichOutcome enrich(const std::set<std::string>& cusips);

private:
    http::Transport& transport_;
    FigiOptions options_;
    http::RateLimiter limiter_;
};

// ---------------------------------------------------------------------------
// Filters

inline constexpr double kMinPositionUsd = 10000.0;
inline constexpr std::string_view kCommonStock = "Common Stock";

struct FilterCounts {
    std::size_t input = 0;
    std::size_t invalid_cusip = 0;
    std::size_t not_us_listed = 0;
    std::size_t not_common_stock = 0;
    std::size_t not_long = 0;
    std::size_t below_min_value = 0;
    std::size_t retained = 0;
};

struct FilterResult {
    std::vector<HoldingRecord> records;
    FilterCounts counts;
};

/// Keeps records that have a valid CUSIP, are US listed common stock, have
/// a Long payoff and at least 10,000 USD of value. Order is preserved; drops
/// are attributed to the first failing predicate.
FilterResult apply_filters(const std::vector<HoldingRecord>& records, const std::map<std::string, SecurityMeta>& meta);

/// Normalized rows with ticker and per fund-quarter weight.
std::vector<HoldingRow> to_holding_rows(const std::vector<HoldingRecord>& records,
                                        const std::map<std::string, SecurityMeta>& meta);

}  // namespace fundbasket::ingest
