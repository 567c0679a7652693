#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvpc/backtest.hpp"
#include "lvpc/config.hpp"
#include "lvpc/eval.hpp"
#include "lvpc/serialize.hpp"
#include "lvpc/specgen.hpp"

namespace lvpc::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kUnivariateId = "univariate";

struct RunOptions {
    bool force = false;
    int parallel = 0;  // 0: use the config value
    std::optional<std::string> only_spec;
    std::optional<std::vector<Methodology>> methodologies;
};

struct RunStatus {
    int computed = 0;
    int skipped = 0;
    int failed = 0;
};

inline VintageStore ingest(const RunConfig& cfg) {
    VintageStore store;
    for (const auto& f : cfg.data) store.merge(load_vintage_csv(f.path.string(), cfg.columns, f.release_lags));
    for (const auto& v : cfg.variables) {
        for (const auto& s : v.sources) {
            if (!store.contains(s)) throw ConfigError("variable '" + v.name + "' references missing series '" + s + "'");
        }
    }
    return store;
}

inline void print_store_summary(std::ostream& out, const VintageStore& store) {
    out << "series_id,first_period,last_period,first_release,last_release,periods,revisions\n";
    for (const auto& [id, s] : store.all()) {
        auto d = [](const std::optional<Date>& x) { return x ? format_date(*x) : std::string{}; };
        out << lvpc::detail::csv_field(id) << ',' << d(s.first_period()) << ',' << d(s.last_period()) << ','
            << d(s.first_release()) << ',' << d(s.last_release()) << ',' << s.period_count() << ',' << s.revision_count()
            << '\n';
    }
}

inline std::vector<FactorSpec> selected_specs(const RunConfig& cfg, const RunOptions& opts) {
    auto specs = generate_specs(cfg.dependent, cfg.families);
    if (!opts.only_spec) return specs;
    std::vector<FactorSpec> out;
    for (auto& s : specs) {
        if (s.spec_id == *opts.only_spec) out.push_back(std::move(s));
    }
    if (out.empty()) throw ConfigError("no spec with id " + *opts.only_spec);
    return out;
}

inline BacktestSpec to_backtest_spec(const RunConfig& cfg, const FactorSpec& f) {
    BacktestSpec b{f.spec_id, cfg.variable(cfg.dependent), {}};
    for (const auto& r : f.regressors()) b.regressors.push_back(cfg.variable(r));
    return b;
}

inline fs::path profile_path(const RunConfig& cfg, const std::string& spec_id, Methodology m) {
    return cfg.output_dir / "profiles" / (spec_id + "__" + slug(m) + ".csv");
}

inline fs::path fit_path(const RunConfig& cfg, const std::string& spec_id, Methodology m) {
    return cfg.output_dir / "fits" / (spec_id + "__" + slug(m) + ".json");
}

namespace detail {

// Write to a sibling temp file and rename, so an interrupted run never leaves a partial output.
inline void write_atomically(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << content;
        if (!out) throw ConfigError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

struct Unit {
    std::string spec_id;  // kUnivariateId for univariate runs
    Methodology methodology;
    std::size_t spec_index;
};

}  // namespace detail

inline std::pair<std::vector<Methodology>, std::vector<Methodology>> split_methodologies(const RunConfig& cfg,
                                                                                         const RunOptions& opts) {
    if (!opts.methodologies) return {cfg.methodologies, cfg.univariate};
    std::vector<Methodology> pc, uni;
    for (auto m : *opts.methodologies) (is_univariate(m) ? uni : pc).push_back(m);
    return {pc, uni};
}

/// Runs every pending (spec, methodology) unit and writes one profile CSV per unit.
/// Existing profiles are kept unless `force`. Unit failures are logged and counted.
inline RunStatus cmd_backtest(const RunConfig& cfg, const RunOptions& opts, std::ostream& log) {
    const VintageStore store = ingest(cfg);
    const auto specs = selected_specs(cfg, opts);
    const auto [pcs, unis] = split_methodologies(cfg, opts);
    {
        std::ostringstream csv;
        write_specs_csv(csv, generate_specs(cfg.dependent, cfg.families));
        detail::write_atomically(cfg.output_dir / "specs.csv", csv.str());
    }

    RunStatus status;
    std::vector<detail::Unit> units;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        for (auto m : pcs) {
            if (!opts.force && fs::exists(profile_path(cfg, specs[i].spec_id, m))) {
                ++status.skipped;
                continue;
            }
            units.push_back({specs[i].spec_id, m, i});
        }
    }
    for (auto m : unis) {
        if (!opts.force && fs::exists(profile_path(cfg, kUnivariateId, m))) {
            ++status.skipped;
            continue;
        }
        units.push_back({kUnivariateId, m, 0});
    }
    if (units.empty()) return status;

    // Only variables some pending unit needs go into the snapshot cache.
    std::set<std::string> needed{cfg.dependent};
    for (const auto& u : units) {
        if (u.spec_id == kUnivariateId) continue;
        for (const auto& r : specs[u.spec_index].regressors()) needed.insert(r);
    }
    std::vector<VariableDef> vars;
    for (const auto& n : needed) vars.push_back(cfg.variable(n));
    const int threads = opts.parallel > 0 ? opts.parallel : cfg.parallel;
    const auto& bt = cfg.backtest;
    const SnapshotCache cache(store, vars, clock_dates(bt.start, bt.end, bt.clock_checks_per_quarter), threads);
    const QuarterMap actuals = realized_values(store, cfg.variable(cfg.dependent), bt.realized);

    std::mutex log_mutex;
    std::atomic<int> computed{0}, failed{0};
    parallel_for(units.size(), threads, [&](std::size_t k) {
        const auto& u = units[k];
        try {
            BacktestSpec spec = u.spec_id == kUnivariateId
                                    ? BacktestSpec{kUnivariateId, cfg.variable(cfg.dependent), {}}
                                    : to_backtest_spec(cfg, specs[u.spec_index]);
            auto result = run_backtest(spec, u.methodology, cache, bt);
            realize(result.profiles, actuals);
            std::ostringstream csv;
            write_profiles_csv(csv, result.profiles);
            if (!result.last_fit.is_null()) {
                detail::write_atomically(fit_path(cfg, u.spec_id, u.methodology), result.last_fit.dump(2) + "\n");
            }
            detail::write_atomically(profile_path(cfg, u.spec_id, u.methodology), csv.str());
            ++computed;
        } catch (const std::exception& e) {
            ++failed;
            std::lock_guard lock(log_mutex);
            log << "error: spec " << u.spec_id << " " << label(u.methodology) << ": " << e.what() << '\n';
        }
    });
    status.computed = computed;
    status.failed = failed;
    return status;
}

inline std::vector<ForecastProfile> load_profiles(const fs::path& path, const std::string& spec_id, Methodology m) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing profile file " + path.string());
    auto out = read_profiles_csv(in, spec_id, label(m), path.string());
    return out;
}

/// Reads the profiles back and writes report_<group>.csv, report_pairwise.csv and summary.json.
inline eval::EvalOutput cmd_evaluate(const RunConfig& cfg, const RunOptions& opts) {
    if (!fs::is_directory(cfg.output_dir / "profiles") || fs::is_empty(cfg.output_dir / "profiles")) {
        throw ConfigError("no profiles in " + (cfg.output_dir / "profiles").string() + "; run backtest first");
    }
    const auto specs = selected_specs(cfg, opts);
    eval::EvalInput input;
    for (auto m : cfg.univariate) input.univariate[label(m)] = load_profiles(profile_path(cfg, kUnivariateId, m), kUnivariateId, m);
    for (const auto& s : specs) {
        eval::SpecForecasts sf{s.spec_id, s.regressors(), {}};
        for (auto m : cfg.methodologies) sf.by_methodology[label(m)] = load_profiles(profile_path(cfg, s.spec_id, m), s.spec_id, m);
        input.specs.push_back(std::move(sf));
    }
    auto out = eval::evaluate(input, cfg.evaluation);
    for (const auto& [name, rows] : out.groups) {
        std::ostringstream csv;
        eval::write_report_csv(csv, rows);
        detail::write_atomically(cfg.output_dir / ("report_" + name + ".csv"), csv.str());
    }
    {
        std::ostringstream csv;
        eval::write_report_csv(csv, out.pairwise);
        detail::write_atomically(cfg.output_dir / "report_pairwise.csv", csv.str());
    }
    detail::write_atomically(cfg.output_dir / "summary.json", out.summary.dump(2) + "\n");
    return out;
}

}  // namespace lvpc::pipeline
