#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lvpc/benchmarks.hpp"
#include "lvpc/calendar.hpp"
#include "lvpc/data.hpp"
#include "lvpc/design.hpp"
#include "lvpc/lsr.hpp"
#include "lvpc/methodology.hpp"
#include "lvpc/serialize.hpp"

namespace lvpc {

enum class RealizedVintage { latest, first_release };

struct BacktestConfig {
    int min_df = 40;
    double half_life_years = 10.0;
    int horizons = 8;
    int clock_checks_per_quarter = 2;
    Date start = make_date(1983, 1, 1);
    Date end = make_date(2025, 12, 31);
    RealizedVintage realized = RealizedVintage::latest;
    double lsr_tol = 1e-10;
    int lsr_max_fp_iters = 1000;
    optim::SimplexOptions ml_opts{};

    void validate() const {
        if (min_df < 1) throw ConfigError("backtest: min_df must be >= 1");
        if (horizons < 1) throw ConfigError("backtest: horizons must be >= 1");
        if (!(half_life_years > 0)) throw ConfigError("backtest: half_life_years must be positive");
        if (clock_checks_per_quarter < 1) throw ConfigError("backtest: clock_checks_per_quarter must be >= 1");
        if (end < start) throw ConfigError("backtest: end before start");
        ml_opts.validate();
    }

    lsr::LsrConfig lsr_config(bool ar, bool ma) const {
        lsr::LsrConfig c;
        c.F = horizons;
        c.tol = lsr_tol;
        c.max_fp_iters = lsr_max_fp_iters;
        c.include_ar_term = ar;
        c.ma1 = ma;
        c.ml_opts = ml_opts;
        return c;
    }
};

/// A dependent variable plus the regressors of one factor specification.
struct BacktestSpec {
    std::string id;
    VariableDef dependent;
    std::vector<VariableDef> regressors;
};

struct HorizonForecast {
    double prediction = 0;
    std::optional<double> realized;
    int model_df = 0;
    bool converged = true;
};

struct ForecastProfile {
    std::string spec_id;
    std::string methodology;
    Date origin;     // clock date of the information set
    Quarter base{};  // last dependent quarter known at origin
    std::map<int, HorizonForecast> horizons;
};

/// Evenly spaced check dates: k per quarter, starting on the first day of each quarter.
inline std::vector<Date> clock_dates(Date start, Date end, int checks_per_quarter) {
    if (checks_per_quarter < 1) throw std::invalid_argument("clock_dates: need at least one check per quarter");
    std::vector<Date> out;
    for (Quarter q = Quarter::containing(start); q <= Quarter::containing(end); ++q) {
        const auto len = ((q + 1).start_date() - q.start_date()).count();
        for (int i = 0; i < checks_per_quarter; ++i) {
            const Date d = q.start_date() + std::chrono::days{len * i / checks_per_quarter};
            if (d >= start && d <= end) out.push_back(d);
        }
    }
    return out;
}

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Each index runs exactly once.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Transformed views of every pool variable at every clock date, built once and shared read-only.
class SnapshotCache {
public:
    SnapshotCache(const VintageStore& store, std::vector<VariableDef> variables, std::vector<Date> dates, int threads = 1)
        : store_(&store), dates_(std::move(dates)) {
        for (auto& v : variables) {
            if (index_.count(v.name)) throw ConfigError("duplicate variable name '" + v.name + "'");
            for (const auto& src : v.sources) store.at(src);
            index_.emplace(v.name, vars_.size());
            vars_.push_back(std::move(v));
        }
        snapshots_.assign(dates_.size(), std::vector<QuarterlySeries>(vars_.size()));
        parallel_for(dates_.size(), threads, [&](std::size_t di) {
            for (std::size_t vi = 0; vi < vars_.size(); ++vi) {
                snapshots_[di][vi] = transformed_as_of(store, vars_[vi], dates_[di]);
            }
        });
    }

    const std::vector<Date>& dates() const { return dates_; }
    const VintageStore& store() const { return *store_; }
    const std::vector<VariableDef>& variables() const { return vars_; }

    const VariableDef& variable(const std::string& name) const { return vars_.at(index_of(name)); }
    const QuarterlySeries& series(std::size_t date_index, const std::string& name) const {
        return snapshots_.at(date_index).at(index_of(name));
    }

private:
    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("variable '" + name + "' is not in the snapshot pool");
        return it->second;
    }

    const VintageStore* store_;
    std::vector<Date> dates_;
    std::vector<VariableDef> vars_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<QuarterlySeries>> snapshots_;
};

namespace detail {

struct OriginFit {
    ForecastProfile profile;
    nlohmann::json fit;
};

inline std::span<const double> as_span(const std::vector<double>& v) { return {v.data(), v.size()}; }

inline std::optional<OriginFit> fit_latent(const MethodologyInfo& mi, const std::vector<QuarterlySeries>& xs,
                                           const QuarterlySeries& y, Date origin, const BacktestConfig& cfg) {
    const int F = cfg.horizons, n = static_cast<int>(xs.size());
    const bool ar = mi.ar_order > 0;
    LaggedDesign design;
    try {
        design = build_lagged_design(xs, y, F, ar ? 1 : 0);
    } catch (const InsufficientDataError&) {
        return std::nullopt;
    }
    const int df = static_cast<int>(design.rows()) - coefficient_count(mi.id, n, F);
    if (df < cfg.min_df) return std::nullopt;

    const Eigen::VectorXd w = exp_weights(std::span<const Quarter>(design.periods), origin, cfg.half_life_years);
    const auto lcfg = cfg.lsr_config(ar, mi.ma);
    lsr::LsrFit fit;
    try {
        if (mi.ma) {
            fit = lsr::lsr_fit_ma(design, w, lcfg);
        } else {
            const auto m = weighted_moments(design, w, cfg.half_life_years);
            fit = ar ? lsr::lsr_fit_ar(m, n, F, lcfg) : lsr::lsr_fit(m, n, F, lcfg);
        }
    } catch (const SingularMatrixError&) {
        return std::nullopt;
    }
    const AlignedRows rows = align_rows(xs, y.last());
    if (rows.periods.empty() || rows.periods.back() != y.last()) return std::nullopt;
    const Eigen::VectorXd wx = exp_weights(std::span<const Quarter>(rows.periods), origin, cfg.half_life_years);
    lsr::attach_latent_dynamics(fit, rows.X, wx);
    const Eigen::VectorXd xt = lsr::latent_series(rows.X, fit.omega);
    const auto preds = lsr::lsr_predict_profile(fit, std::span<const double>(xt.data(), static_cast<std::size_t>(xt.size())),
                                                as_span(y.values), F);
    OriginFit out;
    for (int h = 1; h <= F; ++h) out.profile.horizons[h] = {preds[static_cast<std::size_t>(h - 1)], std::nullopt, df, fit.converged};
    out.fit = fit;
    return out;
}

inline std::optional<OriginFit> fit_direct_family(const MethodologyInfo& mi, const std::vector<QuarterlySeries>& xs,
                                                  const QuarterlySeries& y, Date origin, const BacktestConfig& cfg) {
    const int n = static_cast<int>(xs.size());
    const Quarter t = y.last();
    std::vector<double> x_t;
    for (const auto& x : xs) x_t.push_back(x.at(t));
    OriginFit out;
    out.fit = nlohmann::json::object();
    for (int h = 1; h <= cfg.horizons; ++h) {
        DirectDesign d;
        try {
            d = build_direct_design(xs, y, h, mi.ar_order);
        } catch (const InsufficientDataError&) {
            continue;
        }
        const int df = static_cast<int>(d.rows()) - coefficient_count(mi.id, n, cfg.horizons);
        if (df < cfg.min_df) continue;
        const Eigen::VectorXd w = exp_weights(std::span<const Quarter>(d.periods), origin, cfg.half_life_years);
        try {
            const auto fit = bench::fit_direct(d, w, mi.kind, cfg.ml_opts);
            out.profile.horizons[h] = {bench::bench_predict(fit, x_t, as_span(y.values), h), std::nullopt, df, fit.converged};
            out.fit[std::to_string(h)] = fit;
        } catch (const SingularMatrixError&) {
            continue;
        } catch (const InsufficientDataError&) {
            continue;
        }
    }
    if (out.profile.horizons.empty()) return std::nullopt;
    return out;
}

inline std::optional<OriginFit> fit_univariate_family(const MethodologyInfo& mi, const QuarterlySeries& y, Date origin,
                                                      const BacktestConfig& cfg) {
    const int coefs = coefficient_count(mi.id, 0, cfg.horizons);
    const int rows = static_cast<int>(y.size()) - (mi.kind == bench::BenchKind::AR    ? mi.ar_order
                                                   : mi.kind == bench::BenchKind::ARMA11 ? 1
                                                                                         : 0);
    const int df = rows - coefs;
    if (df < cfg.min_df) return std::nullopt;
    std::vector<Quarter> periods;
    for (Quarter q = y.first; q <= y.last(); ++q) periods.push_back(q);
    const Eigen::VectorXd w = exp_weights(std::span<const Quarter>(periods), origin, cfg.half_life_years);
    OriginFit out;
    try {
        const auto fit = bench::fit_univariate(as_span(y.values), w, mi.kind, std::max(mi.ar_order, 1), cfg.ml_opts);
        for (int h = 1; h <= cfg.horizons; ++h) {
            out.profile.horizons[h] = {bench::bench_predict(fit, {}, as_span(y.values), h), std::nullopt, df, fit.converged};
        }
        out.fit = fit;
    } catch (const SingularMatrixError&) {
        return std::nullopt;
    } catch (const InsufficientDataError&) {
        return std::nullopt;
    }
    return out;
}

}  // namespace detail

struct BacktestResult {
    std::vector<ForecastProfile> profiles;
    nlohmann::json last_fit;  // fit behind the final profile
};

/// Rolling out-of-sample run of one methodology on one specification.
///
/// At each clock date the engine takes as-of snapshots and emits a profile only if
/// (a) some source series of the spec has a release since the last emitted profile,
/// (b) every regressor's latest quarter is at least as recent as the dependent's, and
/// (c) usable rows minus estimated coefficients reach `min_df`. The forecast base t is
/// the dependent's latest quarter; regressor data after t is ignored. Univariate
/// methodologies ignore the spec's regressors.
inline BacktestResult run_backtest(const BacktestSpec& spec, Methodology methodology, const SnapshotCache& cache,
                                   const BacktestConfig& cfg) {
    cfg.validate();
    const auto& mi = info(methodology);
    const bool univariate = mi.family == Family::univariate;

    std::vector<std::string> sources(spec.dependent.sources);
    if (!univariate) {
        for (const auto& r : spec.regressors) sources.insert(sources.end(), r.sources.begin(), r.sources.end());
    }
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    if (!univariate && spec.regressors.empty()) throw ConfigError("spec '" + spec.id + "' has no regressors");

    BacktestResult result;
    std::optional<std::vector<std::size_t>> last_counts;
    const auto& dates = cache.dates();
    for (std::size_t di = 0; di < dates.size(); ++di) {
        const Date d = dates[di];
        if (d < cfg.start || d > cfg.end) continue;
        std::vector<std::size_t> counts;
        for (const auto& s : sources) counts.push_back(cache.store().at(s).releases_through(d));
        if (last_counts ? counts == *last_counts : std::all_of(counts.begin(), counts.end(), [](auto c) { return c == 0; })) {
            continue;
        }
        const QuarterlySeries& y = cache.series(di, spec.dependent.name);
        if (y.empty()) continue;
        const Quarter t = y.last();

        std::optional<detail::OriginFit> fit;
        if (univariate) {
            fit = detail::fit_univariate_family(mi, y, d, cfg);
        } else {
            std::vector<QuarterlySeries> xs;
            bool fresh = true;
            for (const auto& r : spec.regressors) {
                const auto& x = cache.series(di, r.name);
                if (x.empty() || x.last() < t) {
                    fresh = false;
                    break;
                }
                xs.push_back(x.truncated(t));
            }
            if (!fresh) continue;
            fit = mi.family == Family::latent ? detail::fit_latent(mi, xs, y, d, cfg)
                                              : detail::fit_direct_family(mi, xs, y, d, cfg);
        }
        if (!fit) continue;
        fit->profile.spec_id = spec.id;
        fit->profile.methodology = std::string(mi.label);
        fit->profile.origin = d;
        fit->profile.base = t;
        result.profiles.push_back(std::move(fit->profile));
        result.last_fit = std::move(fit->fit);
        last_counts = std::move(counts);
    }
    return result;
}

/// Realized dependent values by quarter, at the latest vintage or at first release.
inline QuarterMap realized_values(const VintageStore& store, const VariableDef& dependent, RealizedVintage mode) {
    QuarterMap out;
    const auto last = store.last_release();
    if (!last) return out;
    if (mode == RealizedVintage::latest) {
        const auto s = transformed_as_of(store, dependent, *last);
        for (std::size_t i = 0; i < s.size(); ++i) out.emplace(s.first + static_cast<int>(i), s.values[i]);
        return out;
    }
    std::set<Date> releases;
    for (const auto& src : dependent.sources) {
        const auto& r = store.at(src).release_dates();
        releases.insert(r.begin(), r.end());
    }
    for (Date d : releases) {
        const auto s = transformed_as_of(store, dependent, d);
        for (std::size_t i = 0; i < s.size(); ++i) out.emplace(s.first + static_cast<int>(i), s.values[i]);
    }
    return out;
}

/// Attaches realized values for base + f; horizons beyond available history stay empty.
inline void realize(std::vector<ForecastProfile>& profiles, const QuarterMap& actuals) {
    for (auto& p : profiles) {
        for (auto& [h, hf] : p.horizons) {
            if (auto it = actuals.find(p.base + h); it != actuals.end()) hf.realized = it->second;
        }
    }
}

// ---------------------------------------------------------------------------
// Profile CSV: origin,horizon,prediction,realized,model_df,converged

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_profiles_csv(std::ostream& out, const std::vector<ForecastProfile>& profiles) {
    out << "origin,horizon,prediction,realized,model_df,converged\n";
    for (const auto& p : profiles) {
        for (const auto& [h, hf] : p.horizons) {
            out << format_date(p.origin) << ',' << h << ',' << format_double(hf.prediction) << ','
                << (hf.realized ? format_double(*hf.realized) : std::string{}) << ',' << hf.model_df << ','
                << (hf.converged ? 1 : 0) << '\n';
        }
    }
}

inline std::vector<ForecastProfile> read_profiles_csv(std::istream& in, const std::string& spec_id,
                                                      const std::string& methodology, const std::string& source = "<stream>") {
    std::vector<ForecastProfile> out;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source + ": empty profile file", 1);
    const auto header = lvpc::detail::split_csv_line(line);
    const std::vector<std::string> expected{"origin", "horizon", "prediction", "realized", "model_df", "converged"};
    if (header != expected) throw ParseError(source + ": unexpected profile header", 1);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = lvpc::detail::split_csv_line(line);
        if (f.size() != 6) throw ParseError(source + ": expected 6 fields", line_no);
        Date origin;
        try {
            origin = parse_date(f[0]);
        } catch (const ParseError&) {
            throw ParseError(source + ": bad origin date", line_no);
        }
        if (out.empty() || out.back().origin != origin) {
            ForecastProfile p;
            p.spec_id = spec_id;
            p.methodology = methodology;
            p.origin = origin;
            out.push_back(std::move(p));
        }
        HorizonForecast hf;
        hf.prediction = lvpc::detail::parse_finite(f[2], line_no, source);
        if (!f[3].empty()) hf.realized = lvpc::detail::parse_finite(f[3], line_no, source);
        hf.model_df = static_cast<int>(lvpc::detail::parse_finite(f[4], line_no, source));
        hf.converged = f[5] == "1" || f[5] == "true";
        out.back().horizons[static_cast<int>(lvpc::detail::parse_finite(f[1], line_no, source))] = hf;
    }
    return out;
}

}  // namespace lvpc
