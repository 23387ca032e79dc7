#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

namespace cascades {

// Exact currency amount stored as an integer count of 1e-12 USD units.
// Token prices fit this grid (e.g. $2.50/1M tokens = 2'500'000 pico),
// so all cost arithmetic is exact and acceptance tests can demand
// bitwise equality.
struct Money {
    std::int64_t pico = 0;

    constexpr Money() = default;
    constexpr explicit Money(std::int64_t p) : pico(p) {}

    static Money from_usd(double usd) {
        return Money{static_cast<std::int64_t>(std::llround(usd * 1e12))};
    }
    double usd() const { return static_cast<double>(pico) * 1e-12; }

    constexpr Money operator+(Money o) const { return Money{pico + o.pico}; }
    constexpr Money operator-(Money o) const { return Money{pico - o.pico}; }
    constexpr Money operator*(std::int64_t n) const { return Money{pico * n}; }
    constexpr Money& operator+=(Money o) {
        pico += o.pico;
        return *this;
    }
    constexpr auto operator<=>(const Money&) const = default;
};

inline constexpr Money operator*(std::int64_t n, Money m) { return m * n; }

inline std::string to_string(Money m) { return std::to_string(m.pico) + "p"; }

}  // namespace cascades
