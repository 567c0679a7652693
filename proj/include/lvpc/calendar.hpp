#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "lvpc/error.hpp"

namespace lvpc {

using Date = std::chrono::sys_days;

inline constexpr double kDaysPerYear = 365.25;

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD).
inline Date parse_date(std::string_view s) {
    auto digits = [&](std::size_t pos, std::size_t len) {
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (s[i] < '0' || s[i] > '9') throw ParseError("invalid date '" + std::string(s) + "'", 0);
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
        throw ParseError("invalid date '" + std::string(s) + "'", 0);
    }
    const std::chrono::year_month_day ymd{std::chrono::year{digits(0, 4)},
                                          std::chrono::month{static_cast<unsigned>(digits(5, 2))},
                                          std::chrono::day{static_cast<unsigned>(digits(8, 2))}};
    if (!ymd.ok()) throw ParseError("invalid date '" + std::string(s) + "'", 0);
    return Date{ymd};
}

inline std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline Date make_date(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

/// Signed age in 365.25-day years.
inline double years_between(Date from, Date to) {
    return static_cast<double>((to - from).count()) / kDaysPerYear;
}

/// Calendar quarter, indexed as year*4 + (quarter-1) so consecutive quarters differ by one.
struct Quarter {
    int index = 0;

    static constexpr Quarter of(int year, int q) { return Quarter{year * 4 + (q - 1)}; }

    static Quarter containing(Date d) {
        const std::chrono::year_month_day ymd{d};
        return of(static_cast<int>(ymd.year()), static_cast<int>((static_cast<unsigned>(ymd.month()) - 1) / 3 + 1));
    }

    constexpr int year() const { return index >= 0 ? index / 4 : -((-index + 3) / 4); }
    constexpr int number() const { return index - year() * 4 + 1; }

    Date start_date() const {
        return make_date(year(), static_cast<unsigned>((number() - 1) * 3 + 1), 1);
    }
    Date end_date() const {
        const auto last_month = std::chrono::month{static_cast<unsigned>(number() * 3)};
        return Date{std::chrono::year{year()} / last_month / std::chrono::last};
    }

    std::string label() const { return std::to_string(year()) + "Q" + std::to_string(number()); }

    constexpr Quarter operator+(int k) const { return Quarter{index + k}; }
    constexpr Quarter operator-(int k) const { return Quarter{index - k}; }
    constexpr int operator-(Quarter o) const { return index - o.index; }
    constexpr Quarter& operator++() {
        ++index;
        return *this;
    }
    constexpr auto operator<=>(const Quarter&) const = default;
};

}  // namespace lvpc
