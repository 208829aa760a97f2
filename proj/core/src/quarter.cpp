#include "fundbasket/quarter.hpp"

#include "fundbasket/errors.hpp"

#include <charconv>
#include <chrono>

namespace fundbasket {

namespace {

int parse_int(std::string_view text, std::string_view context) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw DataError("invalid quarter '" + std::string(context) + "'");
    return value;
}

}  // namespace

Quarter Quarter::parse(std::string_view text) {
    auto qpos = text.find_first_of("Qq");
    if (qpos == std::string_view::npos || qpos + 1 >= text.size())
        throw DataError("invalid quarter '" + std::string(text) + "'");

    int year = 0;
    int q = 0;
    if (qpos == 0) {
        // Q1-2021
        auto dash = text.find('-');
        if (dash == std::string_view::npos) throw DataError("invalid quarter '" + std::string(text) + "'");
        q = parse_int(text.substr(1, dash - 1), text);
        year = parse_int(text.substr(dash + 1), text);
    } else {
        auto year_part = text.substr(0, qpos);
        if (!year_part.empty() && year_part.back() == '-') year_part.remove_suffix(1);
        year = parse_int(year_part, text);
        q = parse_int(text.substr(qpos + 1), text);
    }
    if (q < 1 || q > 4) throw DataError("invalid quarter '" + std::string(text) + "'");
    return Quarter(year, q);
}

Quarter Quarter::from_date(std::string_view iso_date) {
    if (iso_date.size() < 7 || iso_date[4] != '-')
        throw DataError("invalid date '" + std::string(iso_date) + "'");
    int year = parse_int(iso_date.substr(0, 4), iso_date);
    int month = parse_int(iso_date.substr(5, 2), iso_date);
    if (month < 1 || month > 12) throw DataError("invalid date '" + std::string(iso_date) + "'");
    return Quarter(year, (month - 1) / 3 + 1);
}

std::int64_t Quarter::epoch_seconds() const {
    using namespace std::chrono;
    const auto day = sys_days{std::chrono::year{year()} / month{static_cast<unsigned>((q() - 1) * 3 + 1)} / 1};
    return duration_cast<seconds>(day.time_since_epoch()).count();
}

Quarter Quarter::from_epoch_seconds(std::int64_t seconds) {
    using namespace std::chrono;
    const sys_days day = floor<days>(sys_seconds{std::chrono::seconds{seconds}});
    const year_month_day ymd{day};
    return Quarter(static_cast<int>(ymd.year()), (static_cast<unsigned>(ymd.month()) - 1) / 3 + 1);
}

std::string Quarter::str() const {
    return std::to_string(year()) + "Q" + std::to_string(q());
}

std::vector<Quarter> QuarterRange::quarters() const {
    std::vector<Quarter> out;
    for (int o = first.ordinal(); o <= last.ordinal(); ++o) out.push_back(Quarter::from_ordinal(o));
    return out;
}

QuarterRange QuarterRange::parse(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        auto q = Quarter::parse(text);
        return {q, q};
    }
    return {Quarter::parse(text.substr(0, colon)), Quarter::parse(text.substr(colon + 1))};
}

std::string QuarterRange::str() const {
    return first.str() + ":" + last.str();
}

}  // namespace fundbasket
