#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fundbasket {

/// A calendar quarter, e.g. 2021Q1. Ordered chronologically.
class Quarter {
public:
    constexpr Quarter() = default;
    constexpr Quarter(int year, int q) : ordinal_(year * 4 + (q - 1)) {}

    static constexpr Quarter from_ordinal(int ordinal) {
        Quarter out;
        out.ordinal_ = ordinal;
        return out;
    }

    /// Accepts "2021Q1", "2021-Q1" and "Q1-2021".
    static Quarter parse(std::string_view text);

    /// Quarter containing an ISO date "YYYY-MM-DD".
    static Quarter from_date(std::string_view iso_date);

    constexpr int year() const { return ordinal_ / 4; }
    constexpr int q() const { return ordinal_ % 4 + 1; }
    constexpr int ordinal() const { return ordinal_; }

    constexpr Quarter next() const { return from_ordinal(ordinal_ + 1); }
    constexpr Quarter prev() const { return from_ordinal(ordinal_ - 1); }

    /// UTC epoch seconds of the first day of the quarter.
    std::int64_t epoch_seconds() const;
    static Quarter from_epoch_seconds(std::int64_t seconds);

    std::string str() const;

    constexpr auto operator<=>(const Quarter&) const = default;

private:
    int ordinal_ = 0;
};

/// Inclusive range of quarters [first, last].
struct QuarterRange {
    Quarter first;
    Quarter last;

    bool empty() const { return last < first; }
    bool contains(Quarter q) const { return first <= q && q <= last; }
    int size() const { return empty() ? 0 : last.ordinal() - first.ordinal() + 1; }
    std::vector<Quarter> quarters() const;

    /// "2020Q1:2021Q1" or a single quarter.
    static QuarterRange parse(std::string_view text);
    std::string str() const;

    bool operator==(const QuarterRange&) const = default;
};

}  // namespace fundbasket
