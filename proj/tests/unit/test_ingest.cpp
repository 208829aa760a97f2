#include "fundbasket/errors.hpp"
#include "fundbasket/ingest.hpp"

#include "fake_transport.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace fundbasket;
using namespace fundbasket::ingest;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = FUNDBASKET_FIXTURE_DIR;

RawFiling fixture_filing(const std::string& acc, Quarter q, const std::string& filed) {
    return {acc, "0000036405", q, filed, fbtest::read_file(kFixtures / "edgar" / (acc + ".xml"))};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("fundbasket_ingest_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

http::RetryPolicy no_sleep(int attempts = 4) {
    return {attempts, std::chrono::milliseconds(500), [](std::chrono::milliseconds) {}};
}

SecurityMeta good_meta(const std::string& cusip) {
    return {cusip, "TCK", true, "Common Stock", "BBG000000001", "US", ResolveStatus::Matched};
}

HoldingRecord rec(const std::string& cusip, double value, PayoffProfile p = PayoffProfile::Long) {
    return {"S1", cusip, "n", 1.0, value, p, Quarter(2021, 1)};
}

std::string meta_element(const std::string& cusip) {
    const auto mapping = nlohmann::json::parse(fbtest::read_file(kFixtures / "figi" / "mapping.json"));
    return mapping.at(cusip).dump();
}

}  // namespace

TEST_CASE("cusip shape") {
    CHECK(is_valid_cusip("594918104"));
    CHECK(is_valid_cusip("02079K305"));
    CHECK_FALSE(is_valid_cusip("000000000"));
    CHECK_FALSE(is_valid_cusip("59491810"));
    CHECK_FALSE(is_valid_cusip("5949181-4"));
    CHECK(normalize_cik("36405") == "0000036405");
    CHECK_THROWS_AS(normalize_cik("abc"), DataError);
}

TEST_CASE("fixture filing with 69 holdings parses to the expected records") {
    const auto parsed = parse_nport(fixture_filing("0000036405-21-000101", Quarter(2021, 1), "2021-05-27"));
    CHECK(parsed.fund_id == "S000002848");
    CHECK(parsed.quarter == Quarter(2021, 1));
    REQUIRE(parsed.records.size() == 69);
    CHECK(parsed.dropped_invalid_cusip == 0);

    std::istringstream golden(fbtest::read_file(kFixtures / "golden" / "nport_2021q1_records.tsv"));
    std::string line;
    std::getline(golden, line);
    for (const auto& r : parsed.records) {
        REQUIRE(std::getline(golden, line));
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
        REQUIRE(cols.size() == 5);
        CHECK(r.cusip == cols[0]);
        CHECK(r.name == cols[1]);
        CHECK(r.balance == std::stod(cols[2]));
        CHECK(r.value_usd == std::stod(cols[3]));
        CHECK(to_string(r.payoff_profile) == cols[4]);
        CHECK(r.quarter == Quarter(2021, 1));
        CHECK(r.fund_id == "S000002848");
    }
}

TEST_CASE("zero-holding filing and placeholder entries") {
    const auto empty = parse_nport(fixture_filing("0000036405-21-000055", Quarter(2020, 4), "2021-02-26"));
    CHECK(empty.records.empty());
    CHECK(empty.quarter == Quarter(2020, 4));

    const auto q3 = parse_nport(fixture_filing("0000036405-20-000310", Quarter(2020, 3), "2020-11-25"));
    CHECK(q3.dropped_invalid_cusip == 1);
    CHECK(q3.skipped_missing_fields == 1);
    REQUIRE(q3.records.size() == 4);
    for (const auto& r : q3.records) CHECK(r.cusip != "000000000");
    CHECK(q3.records[3].payoff_profile == PayoffProfile::Short);
}

TEST_CASE("malformed XML raises a parse error naming the accession") {
    RawFiling bad{"0000000000-21-000001", "0000000001", Quarter(2021, 1), "2021-05-01",
                  "<edgarSubmission><formData><invstOrSecs>"};
    CHECK_THROWS_AS(parse_nport(bad), ParseError);
    try {
        parse_nport(bad);
    } catch (const ParseError& e) {
        CHECK(e.accession_id() == "0000000000-21-000001");
        CHECK(std::string(e.what()).find("0000000000-21-000001") != std::string::npos);
    }
    bad.body = "<other/>";
    CHECK_THROWS_AS(parse_nport(bad), ParseError);
}

TEST_CASE("render then parse reproduces the record multiset") {
    for (const char* acc : {"0000036405-21-000101", "0000036405-20-000310"}) {
        const auto first = parse_nport(fixture_filing(acc, Quarter(2021, 1), "2021-05-27"));
        RawFiling again{acc, first.cik, first.quarter, first.filed_date, render_nport(first)};
        const auto second = parse_nport(again);
        auto a = first.records;
        auto b = second.records;
        auto key = [](const HoldingRecord& r) { return std::tie(r.cusip, r.value_usd, r.balance, r.name); };
        std::sort(a.begin(), a.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
        std::sort(b.begin(), b.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
        CHECK(a == b);
        CHECK(second.fund_id == first.fund_id);
        CHECK(second.quarter == first.quarter);
    }
}

TEST_CASE("latest filing per fund and quarter wins") {
    ParsedFiling orig{"0000036405-21-000101", "c", "S1", "2021-05-27", Quarter(2021, 1), {rec("594918104", 1.0)}, 0, 0};
    ParsedFiling amend = orig;
    amend.accession_id = "0000036405-21-000150";
    amend.filed_date = "2021-06-30";
    amend.records = {rec("037833100", 2.0)};
    ParsedFiling other_q = orig;
    other_q.quarter = Quarter(2020, 4);
    const auto out = latest_per_fund_quarter({amend, orig, other_q});
    REQUIRE(out.size() == 2);
    CHECK(out[0].quarter == Quarter(2020, 4));
    CHECK(out[1].accession_id == "0000036405-21-000150");

    ParsedFiling same_day = orig;
    same_day.accession_id = "0000036405-21-000102";
    CHECK(latest_per_fund_quarter({same_day, orig})[0].accession_id == "0000036405-21-000102");
}

TEST_CASE("filter boundaries") {
    std::map<std::string, SecurityMeta> meta;
    for (const char* c : {"AAAAAAAA1", "AAAAAAAA2", "AAAAAAAA3"}) meta[c] = good_meta(c);
    const std::vector<HoldingRecord> in = {rec("AAAAAAAA1", 10000.00), rec("AAAAAAAA2", 9999.99),
                                           rec("AAAAAAAA3", 1e6, PayoffProfile::Short),
                                           rec("AAAAAAAA1", 1e6, PayoffProfile::NA)};
    const auto out = apply_filters(in, meta);
    REQUIRE(out.records.size() == 1);
    CHECK(out.records[0].value_usd == 10000.00);
    CHECK(out.counts.below_min_value == 1);
    CHECK(out.counts.not_long == 2);
    CHECK(out.counts.retained == 1);

    meta["AAAAAAAA1"].security_type = "Preferred Stock";
    CHECK(apply_filters({rec("AAAAAAAA1", 1e6)}, meta).counts.not_common_stock == 1);
    meta["AAAAAAAA1"].is_us_listed = false;
    CHECK(apply_filters({rec("AAAAAAAA1", 1e6)}, meta).counts.not_us_listed == 1);
    CHECK(apply_filters({rec("ZZZZZZZZ9", 1e6)}, meta).counts.not_us_listed == 1);
    CHECK(apply_filters({rec("000000000", 1e6)}, meta).counts.invalid_cusip == 1);
}

TEST_CASE("filter properties on random records") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> pick(0, 9);
    std::uniform_real_distribution<double> value(0.0, 30000.0);
    std::map<std::string, SecurityMeta> meta;
    std::vector<std::string> cusips;
    for (int k = 0; k < 10; ++k) {
        std::string c = "CUSIP000" + std::to_string(k);
        auto m = good_meta(c);
        m.is_us_listed = k % 4 != 0;
        m.security_type = k % 5 == 0 ? "ETP" : "Common Stock";
        m.status = k == 7 ? ResolveStatus::NoMatch : ResolveStatus::Matched;
        meta[c] = m;
        cusips.push_back(c);
    }
    cusips.push_back("000000000");
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<HoldingRecord> in;
        for (int n = 0; n < 50; ++n) {
            const auto c = cusips[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 10)(rng))];
            const auto p = static_cast<PayoffProfile>(pick(rng) % 3);
            in.push_back(rec(c, value(rng), p));
        }
        const auto once = apply_filters(in, meta);
        const auto twice = apply_filters(once.records, meta);
        CHECK(twice.records == once.records);
        const auto& c = once.counts;
        CHECK(c.input == in.size());
        CHECK(c.invalid_cusip + c.not_us_listed + c.not_common_stock + c.not_long + c.below_min_value + c.retained ==
              c.input);
        std::size_t cursor = 0;
        for (const auto& r : once.records) {
            const auto& m = meta.at(r.cusip);
            CHECK(is_valid_cusip(r.cusip));
            CHECK(m.resolved());
            CHECK(m.is_us_listed);
            CHECK(m.security_type == "Common Stock");
            CHECK(r.payoff_profile == PayoffProfile::Long);
            CHECK(r.value_usd >= 10000.0);
            // Order preserved: each retained record appears later in the input.
            while (cursor < in.size() && !(in[cursor] == r)) ++cursor;
            CHECK(cursor < in.size());
            ++cursor;
        }
    }
}

TEST_CASE("FIGI response interpretation") {
    const auto msft = meta_from_figi("594918104", meta_element("594918104"));
    CHECK(msft.resolved());
    CHECK(msft.ticker == std::optional<std::string>("MSFT"));
    CHECK(msft.is_us_listed);
    CHECK(msft.security_type == "Common Stock");
    CHECK(msft.exchange_code == "US");
    CHECK(msft.composite_figi.has_value());

    const auto unknown = meta_from_figi("TEST00001", meta_element("TEST00001"));
    CHECK_FALSE(unknown.resolved());
    CHECK_FALSE(unknown.is_us_listed);
    CHECK_FALSE(unknown.ticker.has_value());

    const auto nestle = meta_from_figi("H57820103", R"({"data":[{"ticker":"NESN","exchCode":"SW","securityType":"Common Stock"}]})");
    CHECK(nestle.resolved());
    CHECK_FALSE(nestle.is_us_listed);
    const auto venue = meta_from_figi("X", R"({"data":[{"ticker":"A","exchCode":"LN"},{"ticker":"B","exchCode":"UN","securityType2":"Common Stock"}]})");
    CHECK(venue.ticker == std::optional<std::string>("B"));
    CHECK(venue.security_type == "Common Stock");
    CHECK(meta_from_figi("X", R"({"error":"Invalid idValue"})").status == ResolveStatus::Failed);
}

TEST_CASE("FIGI enrichment batches, caches and backs off") {
    const auto dir = scratch("figi");
    int throttled = 1;
    fbtest::FakeTransport t([&](const http::Request& r) -> http::Response {
        if (throttled-- > 0) return {429, "", "Too Many Requests"};
        return fbtest::fixture_handler(kFixtures)(r);
    });
    std::vector<std::chrono::milliseconds> waits;
    FigiOptions o;
    o.cache_dir = dir;
    o.requests_per_second = 0;
    o.retry = {8, std::chrono::milliseconds(1000), [&](std::chrono::milliseconds d) { waits.push_back(d); }};
    FigiClient client(t, o);

    CHECK(client.enrich({}).meta.empty());
    CHECK(t.requests.empty());

    std::set<std::string> cusips = {"594918104", "TEST00001"};
    for (int k = 0; k < 248; ++k) cusips.insert("Q" + std::to_string(10000000 + k));
    const auto first = client.enrich(cusips);
    CHECK(first.meta.size() == cusips.size());
    CHECK(first.network_requests == 3);
    REQUIRE(t.requests.size() == 4);  // one throttled retry
    CHECK(waits == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000)});
    for (const auto& r : t.requests) {
        CHECK(r.method == "POST");
        CHECK(nlohmann::json::parse(r.body).size() <= 100);
    }
    CHECK(first.meta.at("594918104").ticker == std::optional<std::string>("MSFT"));
    CHECK_FALSE(first.meta.at("TEST00001").resolved());
    CHECK(fs::exists(dir / "figi" / "594918104.json"));

    const auto again = client.enrich(cusips);
    CHECK(again.network_requests == 0);
    CHECK(t.requests.size() == 4);
    CHECK(again.meta.at("594918104").ticker == first.meta.at("594918104").ticker);

    FigiOptions bad = o;
    bad.batch_size = 101;
    CHECK_THROWS_AS(FigiClient(t, bad), ConfigError);
}

TEST_CASE("FIGI permanent failure leaves securities unresolved and uncached") {
    const auto dir = scratch("figi_fail");
    fbtest::FakeTransport t([](const http::Request&) -> http::Response { return {503, "", "unavailable"}; });
    FigiOptions o;
    o.cache_dir = dir;
    o.requests_per_second = 0;
    o.retry = no_sleep(3);
    FigiClient client(t, o);
    const auto out = client.enrich({"594918104"});
    CHECK(out.failed == 1);
    CHECK(out.meta.at("594918104").status == ResolveStatus::Failed);
    CHECK(t.requests.size() == 3);
    CHECK_FALSE(fs::exists(dir / "figi" / "594918104.json"));
}

TEST_CASE("EDGAR fetch against the fixture corpus, cold then warm") {
    const auto dir = scratch("edgar");
    fbtest::FakeTransport t(fbtest::fixture_handler(kFixtures));
    EdgarOptions o;
    o.cache_dir = dir;
    o.requests_per_second = 0;
    o.retry = no_sleep();
    EdgarClient client(t, o);

    const QuarterRange window = QuarterRange::parse("2020Q1:2021Q3");
    const auto cold = client.fetch_filings({"36405"}, window);
    CHECK(cold.errors.empty());
    REQUIRE(cold.filings.size() == 3);
    CHECK(cold.network_requests == 4);
    for (const auto& f : cold.filings) {
        CHECK(f.body == fbtest::read_file(kFixtures / "edgar" / (f.accession_id + ".xml")));
        CHECK(fs::exists(dir / "edgar" / (f.accession_id + ".xml")));
    }
    CHECK(cold.filings[0].report_quarter == Quarter(2020, 3));
    CHECK(cold.filings[2].filed_date == "2021-05-27");
    for (const auto& r : t.requests) {
        CHECK(r.headers.at("User-Agent").find('@') != std::string::npos);
        CHECK(r.url.find("https://") == 0);
    }
    CHECK(std::any_of(t.requests.begin(), t.requests.end(), [](const http::Request& r) {
        return r.url.find("/Archives/edgar/data/36405/000003640520000310/primary_doc.xml") != std::string::npos;
    }));

    const auto warm = client.fetch_filings({"0000036405"}, window);
    CHECK(warm.network_requests == 0);
    CHECK(t.requests.size() == 4);
    REQUIRE(warm.filings.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(warm.filings[k].body == cold.filings[k].body);

    CHECK(client.fetch_filings({}, window).filings.empty());
    const auto narrow = client.fetch_filings({"36405"}, QuarterRange::parse("2021Q1:2021Q1"));
    CHECK(narrow.filings.size() == 1);
}

TEST_CASE("EDGAR failures become error records; corrupt cache is fatal") {
    const auto dir = scratch("edgar_fail");
    fbtest::FakeTransport t([&](const http::Request& r) -> http::Response {
        if (r.url.find("000003640521000055") != std::string::npos) return {500, "", "server error"};
        return fbtest::fixture_handler(kFixtures)(r);
    });
    EdgarOptions o;
    o.cache_dir = dir;
    o.requests_per_second = 0;
    o.retry = no_sleep(2);
    EdgarClient client(t, o);
    const auto out = client.fetch_filings({"36405", "99"}, QuarterRange::parse("2020Q1:2021Q3"));
    CHECK(out.filings.size() == 2);
    REQUIRE(out.errors.size() == 2);
    CHECK(out.errors[0].accession_id == "0000036405-21-000055");
    CHECK(out.errors[0].status == 500);
    CHECK(out.errors[1].accession_id.empty());  // CIK 99 has no index
    CHECK(out.errors[1].cik == "0000000099");
    CHECK(out.errors[1].status == 404);

    {
        std::ofstream corrupt(dir / "edgar" / "0000036405-21-000101.xml", std::ios::trunc);
        corrupt << "not xml at all";
    }
    CHECK_THROWS_AS(client.fetch_filings({"36405"}, QuarterRange::parse("2020Q1:2021Q3")), CacheError);
}

TEST_CASE("retries back off exponentially and stop on client errors") {
    int calls = 0;
    fbtest::FakeTransport flaky([&](const http::Request&) -> http::Response {
        return ++calls < 3 ? http::Response{0, "", "timeout"} : http::Response{200, "ok", ""};
    });
    std::vector<std::chrono::milliseconds> waits;
    http::RetryPolicy p{4, std::chrono::milliseconds(500), [&](std::chrono::milliseconds d) { waits.push_back(d); }};
    CHECK(http::send_with_retry(flaky, {}, p).ok());
    CHECK(waits == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500), std::chrono::milliseconds(1000)});

    fbtest::FakeTransport missing([](const http::Request&) -> http::Response { return {404, "", ""}; });
    CHECK(http::send_with_retry(missing, {}, p).status == 404);
    CHECK(missing.requests.size() == 1);
}

TEST_CASE("holding rows carry tickers and per fund-quarter weights") {
    std::map<std::string, SecurityMeta> meta = {{"AAAAAAAA1", good_meta("AAAAAAAA1")},
                                                {"AAAAAAAA2", good_meta("AAAAAAAA2")}};
    meta["AAAAAAAA2"].ticker = "ZZ";
    const auto rows = to_holding_rows({rec("AAAAAAAA1", 30000), rec("AAAAAAAA2", 10000)}, meta);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].weight == doctest::Approx(0.75));
    CHECK(rows[1].ticker == "ZZ");
}
