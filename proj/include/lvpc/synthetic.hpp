#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvpc/calendar.hpp"
#include "lvpc/data.hpp"

// A small economy with a known latent price-pressure process, for demos and end-to-end checks.
//
//   x~_t   = rho x~_{t-1} + u_t                              (latent AR(1))
//   X_i,t  = a_i x~_t + v_i,t                                (four noisy observables)
//   d pi_t = scale * (sum_tau beta_tau x~_{t-tau} + e_t + theta e_{t-1})
//
// Inflation pi is published as a price index, so log, diff and one extra difference
// recover d pi. Observables are first published with measurement error and revised
// to their final values one quarter later.

namespace lvpc::synthetic {

struct Options {
    std::uint64_t seed = 1;
    int quarters = 200;
    int first_year = 1960;
    double rho = 0.85;
    std::array<double, 4> loadings{1.0, 0.8, -0.6, 0.5};
    double observable_noise = 0.7;
    double theta = -0.5;
    double shock_sd = 1.0;
    double scale = 1e-3;
    int lags = 8;
    int peak_lag = 6;
    double revision_noise = 0.2;
    int release_lag_days = 20;
    int revision_lag_days = 91;
};

inline std::vector<double> true_beta(const Options& o) {
    std::vector<double> b(static_cast<std::size_t>(o.lags));
    for (int tau = 1; tau <= o.lags; ++tau) {
        const double d = tau - o.peak_lag;
        b[static_cast<std::size_t>(tau - 1)] = 0.6 * std::exp(-d * d / 4.0);
    }
    return b;
}

inline VintageStore generate(const Options& o) {
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const int burn = 50;
    const int T = o.quarters + burn;
    const auto beta = true_beta(o);

    std::vector<double> xt(static_cast<std::size_t>(T));
    double x = 0;
    for (int t = 0; t < T; ++t) {
        x = o.rho * x + z(rng);
        xt[static_cast<std::size_t>(t)] = x;
    }
    std::vector<double> dpi(static_cast<std::size_t>(T), 0.0);
    double e_prev = 0;
    for (int t = 0; t < T; ++t) {
        const double e = o.shock_sd * z(rng);
        double signal = 0;
        for (int tau = 1; tau <= o.lags; ++tau) {
            if (t - tau >= 0) signal += beta[static_cast<std::size_t>(tau - 1)] * xt[static_cast<std::size_t>(t - tau)];
        }
        dpi[static_cast<std::size_t>(t)] = o.scale * (signal + e + o.theta * e_prev);
        e_prev = e;
    }

    const Quarter q0 = Quarter::of(o.first_year, 1);
    std::array<std::vector<Observation>, 4> xs;
    std::vector<Observation> price;
    double pi = 0.005, logp = std::log(100.0);
    for (int t = 0; t < T; ++t) {
        pi += dpi[static_cast<std::size_t>(t)];
        logp += pi;
        if (t < burn) continue;
        const Quarter q = q0 + (t - burn);
        const Date period = q.end_date();
        const Date first = q.end_date() + std::chrono::days{o.release_lag_days};
        const Date revised = first + std::chrono::days{o.revision_lag_days};
        for (std::size_t i = 0; i < 4; ++i) {
            const double value = o.loadings[i] * xt[static_cast<std::size_t>(t)] + o.observable_noise * z(rng);
            xs[i].push_back({period, first, value + o.revision_noise * z(rng)});
            xs[i].push_back({period, revised, value});
        }
        price.push_back({period, first + std::chrono::days{10}, std::exp(logp)});
    }
    VintageStore store;
    for (std::size_t i = 0; i < 4; ++i) store.add(VintageSeries("X" + std::to_string(i + 1), std::move(xs[i])));
    store.add(VintageSeries("PRICE", std::move(price)));
    return store;
}

/// Run configuration matching `generate`: X1, X2 as activity, X3, X4 as controls (8 specs).
inline nlohmann::json config(const std::string& data_file, const std::string& output_dir = "out") {
    using nlohmann::json;
    json variables = json::array();
    variables.push_back({{"name", "Inflation"},
                         {"sources", {"PRICE"}},
                         {"transform", {"log", "diff"}},
                         {"aggregation", "quarterly"},
                         {"role", "dependent"},
                         {"variants", {1}}});
    for (int i = 1; i <= 4; ++i) {
        variables.push_back({{"name", "X" + std::to_string(i)},
                             {"sources", {"X" + std::to_string(i)}},
                             {"aggregation", "quarterly"},
                             {"role", i <= 2 ? "activity" : "control"}});
    }
    return json{
        {"data", json::array({json{{"path", data_file}}})},
        {"variables", variables},
        {"dependent", "Inflation (d)"},
        {"families", json::array({json{{"name", "standard"}, {"activity", {"X1", "X2"}}, {"controls", {"X3", "X4"}}}})},
        {"backtest",
         {{"min_df", 40},
          {"half_life_years", 10.0},
          {"horizons", 8},
          {"clock_checks_per_quarter", 2},
          {"start", "1970-01-01"},
          {"end", "2011-12-31"},
          {"realized", "latest"}}},
        {"methodologies", {"ARX(1)", "ARX(2)", "ARX(3)", "ARX(4)", "LSR"}},
        {"univariate", {"EWMA", "AR(1)", "MA(1)"}},
        {"evaluation",
         {{"benchmark", "MA(1)"},
          {"significance", 0.25},
          {"threshold", 0.10},
          {"rank_groups", json::array({json{{"name", "like_for_like"}, {"methodologies", {"ARX(1)", "ARX(2)", "ARX(3)", "ARX(4)", "LSR"}}},
                                       json{{"name", "vs_univariate"}, {"methodologies", {"ARX(1)", "LSR", "EWMA", "AR(1)", "MA(1)"}}}})},
          {"effect_methodologies", {"LSR"}}}},
        {"output_dir", output_dir},
        {"parallel", 1}};
}

/// Writes data.csv and config.json into `dir`.
inline void write_economy(const std::filesystem::path& dir, const Options& o) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "data.csv");
        if (!out) throw ConfigError("cannot write " + (dir / "data.csv").string());
        write_vintage_csv(out, generate(o));
    }
    std::ofstream out(dir / "config.json");
    if (!out) throw ConfigError("cannot write " + (dir / "config.json").string());
    out << config("data.csv").dump(2) << '\n';
}

}  // namespace lvpc::synthetic
