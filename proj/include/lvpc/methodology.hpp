#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "lvpc/benchmarks.hpp"
#include "lvpc/error.hpp"

namespace lvpc {

/// Every forecasting methodology the engine can run.
enum class Methodology {
    X1,
    ARX1,
    ARX2,
    ARX3,
    ARX4,
    MAX11,
    ARMAX11,
    LSR,
    LSR_AR0,
    LSR_MA1,
    LSR_ARMA11,
    EWMA,
    AR1,
    AR2,
    AR3,
    AR4,
    MA1,
    ARMA11,
};

enum class Family { latent, direct, univariate };

struct MethodologyInfo {
    Methodology id;
    std::string_view label;  // display name used in reports
    std::string_view slug;   // file-name safe
    Family family;
    bench::BenchKind kind;   // direct/univariate kinds only
    int ar_order;
    bool ma;
};

inline constexpr std::array<MethodologyInfo, 18> kMethodologies{{
    {Methodology::X1, "X(1)", "X1", Family::direct, bench::BenchKind::X, 0, false},
    {Methodology::ARX1, "ARX(1)", "ARX1", Family::direct, bench::BenchKind::ARX, 1, false},
    {Methodology::ARX2, "ARX(2)", "ARX2", Family::direct, bench::BenchKind::ARX, 2, false},
    {Methodology::ARX3, "ARX(3)", "ARX3", Family::direct, bench::BenchKind::ARX, 3, false},
    {Methodology::ARX4, "ARX(4)", "ARX4", Family::direct, bench::BenchKind::ARX, 4, false},
    {Methodology::MAX11, "MAX(1,1)", "MAX11", Family::direct, bench::BenchKind::MAX, 0, true},
    {Methodology::ARMAX11, "ARMAX(1,1)", "ARMAX11", Family::direct, bench::BenchKind::ARMAX, 1, true},
    {Methodology::LSR, "LSR", "LSR", Family::latent, bench::BenchKind::X, 1, false},
    {Methodology::LSR_AR0, "LSR-AR(0)", "LSR-AR0", Family::latent, bench::BenchKind::X, 0, false},
    {Methodology::LSR_MA1, "LSR-MA(1)", "LSR-MA1", Family::latent, bench::BenchKind::X, 0, true},
    {Methodology::LSR_ARMA11, "LSR-ARMA(1,1)", "LSR-ARMA11", Family::latent, bench::BenchKind::X, 1, true},
    {Methodology::EWMA, "EWMA", "EWMA", Family::univariate, bench::BenchKind::EWMA, 0, false},
    {Methodology::AR1, "AR(1)", "AR1", Family::univariate, bench::BenchKind::AR, 1, false},
    {Methodology::AR2, "AR(2)", "AR2", Family::univariate, bench::BenchKind::AR, 2, false},
    {Methodology::AR3, "AR(3)", "AR3", Family::univariate, bench::BenchKind::AR, 3, false},
    {Methodology::AR4, "AR(4)", "AR4", Family::univariate, bench::BenchKind::AR, 4, false},
    {Methodology::MA1, "MA(1)", "MA1", Family::univariate, bench::BenchKind::MA1, 0, true},
    {Methodology::ARMA11, "ARMA(1,1)", "ARMA11", Family::univariate, bench::BenchKind::ARMA11, 1, true},
}};

inline const MethodologyInfo& info(Methodology m) {
    for (const auto& i : kMethodologies) {
        if (i.id == m) return i;
    }
    throw std::invalid_argument("unknown methodology");
}

inline std::string label(Methodology m) { return std::string(info(m).label); }
inline std::string slug(Methodology m) { return std::string(info(m).slug); }
inline bool is_univariate(Methodology m) { return info(m).family == Family::univariate; }

/// Accepts either the display label ("ARX(1)") or the slug ("ARX1").
inline Methodology parse_methodology(std::string_view name) {
    for (const auto& i : kMethodologies) {
        if (i.label == name || i.slug == name) return i.id;
    }
    throw ConfigError("unknown methodology '" + std::string(name) + "'");
}

/// Estimated coefficients in one fit, which is what the degrees-of-freedom gate subtracts.
inline int coefficient_count(Methodology m, int n, int F) {
    const auto& i = info(m);
    switch (i.family) {
        case Family::latent: return 2 + n + F + i.ar_order + (i.ma ? 1 : 0);
        case Family::direct: return 1 + n + i.ar_order + (i.ma ? 1 : 0);
        case Family::univariate:
            switch (i.kind) {
                case bench::BenchKind::EWMA: return 1;
                case bench::BenchKind::AR: return 1 + i.ar_order;
                case bench::BenchKind::MA1: return 2;
                case bench::BenchKind::ARMA11: return 3;
                default: break;
            }
    }
    return 0;
}

}  // namespace lvpc
