#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <json.hpp>

#include "lvpc/backtest.hpp"
#include "lvpc/error.hpp"

namespace lvpc::eval {

struct Mspe {
    double value = 0;
    int n_obs = 0;
};

inline std::optional<Mspe> mspe(std::span<const double> predicted, std::span<const double> realized) {
    if (predicted.size() != realized.size()) throw std::invalid_argument("mspe: length mismatch");
    if (predicted.empty()) return std::nullopt;
    double sum = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = realized[i] - predicted[i];
        sum += e * e;
    }
    return Mspe{sum / static_cast<double>(predicted.size()), static_cast<int>(predicted.size())};
}

/// MSPE over every realized forecast at `horizon`; nullopt when there is none.
inline std::optional<Mspe> mspe(const std::vector<ForecastProfile>& profiles, int horizon) {
    std::vector<double> p, r;
    for (const auto& prof : profiles) {
        auto it = prof.horizons.find(horizon);
        if (it == prof.horizons.end() || !it->second.realized) continue;
        p.push_back(it->second.prediction);
        r.push_back(*it->second.realized);
    }
    return mspe(p, r);
}

struct RankInput {
    std::string methodology;
    double mspe = 0;
    int n_obs = 0;
};

struct RankEntry {
    std::string methodology;
    double mspe = 0;
    int rank = 0;
    bool tie = false;
};

/// Ranks 1..k by ascending MSPE, equal MSPEs broken by methodology name and flagged.
/// Output follows input order.
inline std::vector<RankEntry> rank_table(const std::vector<RankInput>& in) {
    if (in.empty()) return {};
    std::set<std::string> names;
    for (const auto& r : in) {
        if (!names.insert(r.methodology).second) throw std::invalid_argument("rank_table: duplicate methodology " + r.methodology);
        if (r.n_obs != in.front().n_obs) {
            throw AlignmentError("rank_table: " + r.methodology + " covers " + std::to_string(r.n_obs) + " forecasts, " +
                                 in.front().methodology + " covers " + std::to_string(in.front().n_obs));
        }
    }
    std::vector<std::size_t> order(in.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (in[a].mspe != in[b].mspe) return in[a].mspe < in[b].mspe;
        return in[a].methodology < in[b].methodology;
    });
    std::vector<RankEntry> out(in.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const auto i = order[pos];
        const bool tie = (pos > 0 && in[order[pos - 1]].mspe == in[i].mspe) ||
                         (pos + 1 < order.size() && in[order[pos + 1]].mspe == in[i].mspe);
        out[i] = {in[i].methodology, in[i].mspe, static_cast<int>(pos) + 1, tie};
    }
    return out;
}

struct FTest {
    double f_stat = 1;
    double p_value = 0.5;
    bool degenerate = false;
};

/// One-sided test of H0 "model no better than benchmark". F > 1 favours the model.
inline FTest f_test_mspe(double mspe_model, double mspe_bench, int n_obs) {
    if (n_obs < 2) throw PreconditionError("f_test_mspe: need at least 2 forecasts, got " + std::to_string(n_obs));
    if (!(mspe_model >= 0) || !(mspe_bench >= 0) || !std::isfinite(mspe_model) || !std::isfinite(mspe_bench)) {
        throw DomainError("f_test_mspe: MSPEs must be finite and non-negative");
    }
    if (mspe_model == 0) return {std::numeric_limits<double>::infinity(), 0.0, true};
    const double f = mspe_bench / mspe_model;
    const boost::math::fisher_f dist(n_obs, n_obs);
    return {f, boost::math::cdf(boost::math::complement(dist, f)), false};
}

inline std::optional<double> median(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SpecMspe {
    std::vector<std::string> variables;
    double mspe = 0;
};

/// (median MSPE of specs containing v − median MSPE of all specs) / benchmark MSPE.
/// Negative values mean that including v helps. nullopt when no spec contains v.
inline std::optional<double> predictor_effect(const std::vector<SpecMspe>& specs, const std::string& variable,
                                              double mspe_bm) {
    if (!(mspe_bm > 0)) throw DomainError("predictor_effect: benchmark MSPE must be positive");
    std::vector<double> all, with;
    for (const auto& s : specs) {
        all.push_back(s.mspe);
        if (std::find(s.variables.begin(), s.variables.end(), variable) != s.variables.end()) with.push_back(s.mspe);
    }
    if (with.empty()) return std::nullopt;
    return (*median(with) - *median(all)) / mspe_bm;
}

struct ReportRow {
    std::string spec_id;
    std::string methodology;
    int horizon = 0;
    int n_obs = 0;
    double mspe = 0;
    int rank = 0;
    bool tie = false;
    double f_stat = 1;
    double p_value = 0.5;
    double improvement = 0;  // 1 - mspe / mspe_benchmark
    bool degenerate = false;
};

// Improvements computed as 1 - a/b land a few ulps off round thresholds.
inline constexpr double kThresholdSlack = 1e-12;

/// Share of rows for (methodology, horizon) with rank 1.
inline double rank1_share(const std::vector<ReportRow>& rows, const std::string& methodology, int horizon) {
    std::size_t n = 0, hits = 0;
    for (const auto& r : rows) {
        if (r.methodology != methodology || r.horizon != horizon) continue;
        ++n;
        hits += r.rank == 1;
    }
    return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
}

/// Share of rows for (methodology, horizon) whose improvement over the benchmark is at least `threshold`.
inline double outperform_share(const std::vector<ReportRow>& rows, const std::string& methodology, int horizon,
                               double threshold) {
    std::size_t n = 0, hits = 0;
    for (const auto& r : rows) {
        if (r.methodology != methodology || r.horizon != horizon) continue;
        ++n;
        hits += r.improvement >= threshold - kThresholdSlack;
    }
    return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
}

inline double significant_share(const std::vector<ReportRow>& rows, const std::string& methodology, int horizon,
                                double alpha) {
    std::size_t n = 0, hits = 0;
    for (const auto& r : rows) {
        if (r.methodology != methodology || r.horizon != horizon) continue;
        ++n;
        hits += r.p_value <= alpha;
    }
    return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Pipeline

struct SpecForecasts {
    std::string spec_id;
    std::vector<std::string> variables;
    std::map<std::string, std::vector<ForecastProfile>> by_methodology;  // label -> profiles sorted by origin
};

struct EvalInput {
    std::vector<SpecForecasts> specs;
    std::map<std::string, std::vector<ForecastProfile>> univariate;  // run once per dependent
};

struct RankGroup {
    std::string name;
    std::vector<std::string> methodologies;
};

struct EvalConfig {
    int horizons = 8;
    std::vector<RankGroup> groups;
    std::string benchmark = "MA(1)";
    std::vector<std::string> univariates;  // the "all univariate benchmarks" set
    double significance = 0.25;
    double threshold = 0.10;
    std::vector<std::string> effect_methodologies;
};

struct EvalOutput {
    std::map<std::string, std::vector<ReportRow>> groups;
    std::vector<ReportRow> pairwise;  // each PC methodology vs the univariate set, tests against the benchmark
    nlohmann::json summary;
};

namespace detail {

struct Point {
    double prediction;
    double realized;
};
using Aligned = std::map<Date, Point>;

inline Aligned realized_points(const std::vector<ForecastProfile>& profiles, int h) {
    Aligned out;
    for (const auto& p : profiles) {
        auto it = p.horizons.find(h);
        if (it != p.horizons.end() && it->second.realized) out[p.origin] = {it->second.prediction, *it->second.realized};
    }
    return out;
}

/// For each origin in `keys`, the latest univariate profile issued on or before it.
/// Origins where that profile lacks the horizon or forecasts a different target quarter
/// (its realized value differs) are left out.
inline Aligned match_univariate(const Aligned& keys, const std::vector<ForecastProfile>& uni, int h) {
    Aligned out;
    for (const auto& [d, pt] : keys) {
        auto it = std::upper_bound(uni.begin(), uni.end(), d,
                                   [](Date x, const ForecastProfile& p) { return x < p.origin; });
        if (it == uni.begin()) continue;
        auto f = std::prev(it)->horizons.find(h);
        if (f == std::prev(it)->horizons.end() || !f->second.realized || *f->second.realized != pt.realized) continue;
        out[d] = {f->second.prediction, *f->second.realized};
    }
    return out;
}

/// Drops from `keys` every origin missing in `other`.
inline void intersect(Aligned& keys, const Aligned& other) {
    for (auto it = keys.begin(); it != keys.end();) it = other.count(it->first) ? std::next(it) : keys.erase(it);
}

inline Aligned restrict_to(const Aligned& pts, const Aligned& keys) {
    Aligned out;
    for (const auto& [d, p] : keys) out[d] = pts.at(d);
    return out;
}

inline Mspe mspe_of(const Aligned& a) {
    double s = 0;
    for (const auto& [d, p] : a) s += (p.realized - p.prediction) * (p.realized - p.prediction);
    return {s / static_cast<double>(a.size()), static_cast<int>(a.size())};
}

inline const std::vector<ForecastProfile>& profiles_for(const SpecForecasts& s, const std::string& m) {
    auto it = s.by_methodology.find(m);
    if (it == s.by_methodology.end()) throw ConfigError("spec " + s.spec_id + " has no profiles for " + m);
    return it->second;
}

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace detail

inline EvalOutput evaluate(const EvalInput& input, const EvalConfig& cfg) {
    if (cfg.horizons < 1) throw ConfigError("evaluate: horizons must be >= 1");
    auto uni_profiles = [&](const std::string& label) -> const std::vector<ForecastProfile>& {
        auto it = input.univariate.find(label);
        if (it == input.univariate.end()) throw ConfigError("no univariate profiles for " + label);
        return it->second;
    };
    const bool uni_label = [&] {
        try {
            return is_univariate(parse_methodology(cfg.benchmark));
        } catch (const ConfigError&) {
            return false;
        }
    }();
    if (!uni_label) throw ConfigError("benchmark '" + cfg.benchmark + "' must be a univariate methodology");
    const auto& bench_profiles = uni_profiles(cfg.benchmark);

    auto is_uni = [](const std::string& m) { return is_univariate(parse_methodology(m)); };
    auto mlabel = [](const std::string& m) { return label(parse_methodology(m)); };

    EvalOutput out;
    const int F = cfg.horizons;

    // Rank groups: like-for-like comparisons on the coverage shared by every PC member.
    for (const auto& group : cfg.groups) {
        std::vector<std::string> pcs, unis;
        for (const auto& m : group.methodologies) (is_uni(m) ? unis : pcs).push_back(mlabel(m));
        if (pcs.empty()) throw ConfigError("rank group '" + group.name + "' has no Phillips-curve methodology");
        auto& rows = out.groups[group.name];
        for (const auto& spec : input.specs) {
            for (int h = 1; h <= F; ++h) {
                std::map<std::string, detail::Aligned> series;
                detail::Aligned keys = detail::realized_points(detail::profiles_for(spec, pcs.front()), h);
                for (const auto& m : pcs) {
                    auto pts = detail::realized_points(detail::profiles_for(spec, m), h);
                    for (auto it = keys.begin(); it != keys.end();) {
                        auto f = pts.find(it->first);
                        if (f == pts.end()) {
                            it = keys.erase(it);
                            continue;
                        }
                        if (f->second.realized != it->second.realized) {
                            throw AlignmentError("spec " + spec.spec_id + ": realized values differ between " + pcs.front() +
                                                 " and " + m + " at origin " + format_date(it->first));
                        }
                        ++it;
                    }
                    series[m] = std::move(pts);
                }
                for (const auto& m : unis) {
                    series[m] = detail::match_univariate(keys, uni_profiles(m), h);
                    detail::intersect(keys, series[m]);
                }
                auto bench_pts = detail::match_univariate(keys, bench_profiles, h);
                detail::intersect(keys, bench_pts);
                if (keys.empty()) continue;
                for (auto& [m, pts] : series) pts = detail::restrict_to(pts, keys);
                const auto bm = detail::mspe_of(detail::restrict_to(bench_pts, keys));

                std::vector<RankInput> in;
                for (const auto& m : group.methodologies) {
                    const auto ms = detail::mspe_of(series.at(mlabel(m)));
                    in.push_back({mlabel(m), ms.value, ms.n_obs});
                }
                const auto ranks = rank_table(in);
                for (std::size_t i = 0; i < in.size(); ++i) {
                    ReportRow r{spec.spec_id, in[i].methodology, h, in[i].n_obs, in[i].mspe, ranks[i].rank, ranks[i].tie};
                    if (in[i].n_obs >= 2) {
                        const auto t = f_test_mspe(in[i].mspe, bm.value, in[i].n_obs);
                        r.f_stat = t.f_stat;
                        r.p_value = t.p_value;
                        r.degenerate = t.degenerate;
                    }
                    r.improvement = bm.value > 0 ? 1.0 - in[i].mspe / bm.value : 0.0;
                    rows.push_back(std::move(r));
                }
            }
        }
    }

    // Pairwise: each PC methodology on its own coverage (less origins some univariate lacks)
    // against the univariate set and the benchmark.
    std::set<std::string> pc_set;
    for (const auto& g : cfg.groups) {
        for (const auto& m : g.methodologies) {
            if (!is_uni(m)) pc_set.insert(mlabel(m));
        }
    }
    for (const auto& m : cfg.effect_methodologies) {
        if (is_uni(m)) throw ConfigError("effect methodology '" + m + "' must be a Phillips-curve methodology");
        pc_set.insert(mlabel(m));
    }
    std::vector<std::string> uni_set;
    for (const auto& u : cfg.univariates) {
        if (!is_uni(u)) throw ConfigError("'" + u + "' is not a univariate methodology");
        uni_set.push_back(mlabel(u));
    }
    std::map<std::string, std::map<int, std::vector<SpecMspe>>> effect_inputs;
    for (const auto& spec : input.specs) {
        for (const auto& m : pc_set) {
            for (int h = 1; h <= F; ++h) {
                auto keys = detail::realized_points(detail::profiles_for(spec, m), h);
                std::vector<detail::Aligned> uni_pts;
                for (const auto& u : uni_set) {
                    uni_pts.push_back(detail::match_univariate(keys, uni_profiles(u), h));
                    detail::intersect(keys, uni_pts.back());
                }
                const auto bench_pts = detail::match_univariate(keys, bench_profiles, h);
                detail::intersect(keys, bench_pts);
                if (keys.empty()) continue;
                const auto own = detail::mspe_of(keys);
                const auto bm = detail::mspe_of(detail::restrict_to(bench_pts, keys));
                std::vector<RankInput> in{{m, own.value, own.n_obs}};
                for (std::size_t k = 0; k < uni_set.size(); ++k) {
                    const auto ms = detail::mspe_of(detail::restrict_to(uni_pts[k], keys));
                    in.push_back({uni_set[k], ms.value, ms.n_obs});
                }
                const auto ranks = rank_table(in);
                ReportRow r{spec.spec_id, m, h, own.n_obs, own.value, ranks[0].rank, ranks[0].tie};
                if (own.n_obs >= 2) {
                    const auto t = f_test_mspe(own.value, bm.value, own.n_obs);
                    r.f_stat = t.f_stat;
                    r.p_value = t.p_value;
                    r.degenerate = t.degenerate;
                }
                r.improvement = bm.value > 0 ? 1.0 - own.value / bm.value : 0.0;
                out.pairwise.push_back(r);
                effect_inputs[m][h].push_back({spec.variables, own.value});
            }
        }
    }

    // Summary
    using nlohmann::json;
    json s;
    s["horizons"] = F;
    s["benchmark"] = cfg.benchmark;
    s["significance"] = cfg.significance;
    s["threshold"] = cfg.threshold;
    s["specs"] = input.specs.size();
    json bm_mspe = json::array();
    for (int h = 1; h <= F; ++h) {
        const auto m = mspe(bench_profiles, h);
        bm_mspe.push_back(m ? json(m->value) : json(nullptr));
    }
    s["benchmark_mspe"] = bm_mspe;

    s["groups"] = json::object();
    for (const auto& group : cfg.groups) {
        const auto& rows = out.groups.at(group.name);
        json g = json::object();
        for (const auto& raw : group.methodologies) {
            const auto m = mlabel(raw);
            json med = json::array(), share = json::array(), count = json::array();
            for (int h = 1; h <= F; ++h) {
                std::vector<double> ranks;
                for (const auto& r : rows) {
                    if (r.methodology == m && r.horizon == h) ranks.push_back(r.rank);
                }
                med.push_back(detail::opt_json(median(ranks)));
                share.push_back(ranks.empty() ? json(nullptr) : json(rank1_share(rows, m, h)));
                count.push_back(ranks.size());
            }
            g[m] = {{"median_rank", med}, {"rank1_share", share}, {"specs_ranked", count}};
        }
        s["groups"][group.name] = g;
    }

    json beats = json::object(), sig = json::object(), imp = json::object();
    for (const auto& m : pc_set) {
        json b = json::array(), sg = json::array(), im = json::array();
        for (int h = 1; h <= F; ++h) {
            const bool any = std::any_of(out.pairwise.begin(), out.pairwise.end(),
                                         [&](const ReportRow& r) { return r.methodology == m && r.horizon == h; });
            b.push_back(any ? json(rank1_share(out.pairwise, m, h)) : json(nullptr));
            sg.push_back(any ? json(significant_share(out.pairwise, m, h, cfg.significance)) : json(nullptr));
            im.push_back(any ? json(outperform_share(out.pairwise, m, h, cfg.threshold)) : json(nullptr));
        }
        beats[m] = b;
        sig[m] = sg;
        imp[m] = im;
    }
    s["beats_all_univariate"] = beats;
    s["significant_share"] = sig;
    s["improvement_share"] = imp;

    std::set<std::string> variables;
    for (const auto& spec : input.specs) variables.insert(spec.variables.begin(), spec.variables.end());
    json effects = json::object();
    for (const auto& raw : cfg.effect_methodologies) {
        const auto m = mlabel(raw);
        json per_var = json::object();
        for (const auto& v : variables) {
            json arr = json::array();
            for (int h = 1; h <= F; ++h) {
                const auto bm = mspe(bench_profiles, h);
                auto it = effect_inputs[m].find(h);
                if (!bm || !(bm->value > 0) || it == effect_inputs[m].end()) {
                    arr.push_back(nullptr);
                    continue;
                }
                arr.push_back(detail::opt_json(predictor_effect(it->second, v, bm->value)));
            }
            per_var[v] = arr;
        }
        effects[m] = per_var;
    }
    s["predictor_effects"] = effects;
    out.summary = std::move(s);
    return out;
}

inline void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
    out << "spec_id,methodology,horizon,n_obs,mspe,rank,f_stat,p_value,improvement\n";
    for (const auto& r : rows) {
        out << r.spec_id << ',' << lvpc::detail::csv_field(r.methodology) << ',' << r.horizon << ',' << r.n_obs << ',' << format_double(r.mspe) << ','
            << r.rank << ',' << (std::isinf(r.f_stat) ? std::string("inf") : format_double(r.f_stat)) << ','
            << format_double(r.p_value) << ',' << format_double(r.improvement) << '\n';
    }
}

}  // namespace lvpc::eval
