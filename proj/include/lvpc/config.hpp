#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvpc/backtest.hpp"
#include "lvpc/data.hpp"
#include "lvpc/eval.hpp"
#include "lvpc/methodology.hpp"
#include "lvpc/specgen.hpp"

namespace lvpc {

struct DataFile {
    std::filesystem::path path;
    std::map<std::string, int> release_lags;  // for series without release dates
};

/// Everything one batch run needs. Paths are resolved against the config file's directory.
struct RunConfig {
    std::filesystem::path source;
    std::vector<DataFile> data;
    ColumnMapping columns;
    std::vector<VariableDef> variables;  // expanded: one entry per differencing variant
    std::string dependent;
    std::vector<FamilyRule> families;
    BacktestConfig backtest;
    std::vector<Methodology> methodologies;  // Phillips-curve methodologies run per spec
    std::vector<Methodology> univariate;     // run once on the dependent
    eval::EvalConfig evaluation;
    std::filesystem::path output_dir;
    int parallel = 1;

    const VariableDef& variable(const std::string& name) const {
        for (const auto& v : variables) {
            if (v.name == name) return v;
        }
        throw ConfigError("unknown variable '" + name + "'");
    }
};

namespace detail {

inline TransformStep parse_step(const std::string& s) {
    if (s == "log") return TransformStep::natural_log;
    if (s == "diff") return TransformStep::first_difference;
    if (s == "subtract_second") return TransformStep::subtract_second;
    if (s == "second_if_missing") return TransformStep::take_second_if_first_missing;
    throw ConfigError("unknown transform step '" + s + "'");
}

inline Role parse_role(const std::string& s) {
    if (s == "dependent") return Role::dependent;
    if (s == "factor" || s == "activity") return Role::factor;
    if (s == "control") return Role::control;
    throw ConfigError("unknown role '" + s + "'");
}

inline Aggregation parse_aggregation(const std::string& s) {
    if (s == "last") return Aggregation::last;
    if (s == "mean") return Aggregation::mean;
    if (s == "quarterly") return Aggregation::quarterly;
    throw ConfigError("unknown aggregation '" + s + "'");
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                  const std::filesystem::path& source = {}) {
    RunConfig cfg;
    cfg.source = source;
    try {
        for (const auto& d : j.at("data")) {
            DataFile f;
            f.path = base_dir / d.at("path").get<std::string>();
            if (d.contains("release_lags")) f.release_lags = d.at("release_lags").get<std::map<std::string, int>>();
            cfg.data.push_back(std::move(f));
        }
        if (j.contains("columns")) {
            const auto& c = j.at("columns");
            cfg.columns.series_id = detail::get_or<std::string>(c, "series_id", "series_id");
            cfg.columns.period = detail::get_or<std::string>(c, "period", "period");
            cfg.columns.release = detail::get_or<std::string>(c, "release", "release");
            cfg.columns.value = detail::get_or<std::string>(c, "value", "value");
        }

        std::set<std::string> names;
        for (const auto& v : j.at("variables")) {
            VariableDef def;
            def.name = v.at("name").get<std::string>();
            def.sources = v.at("sources").get<std::vector<std::string>>();
            for (const auto& s : detail::get_or<std::vector<std::string>>(v, "transform", {})) {
                def.transform.steps.push_back(detail::parse_step(s));
            }
            def.role = detail::parse_role(detail::get_or<std::string>(v, "role", "factor"));
            def.aggregation = detail::parse_aggregation(detail::get_or<std::string>(v, "aggregation", "last"));
            if (def.sources.empty() || def.sources.size() > 2) {
                throw ConfigError("variable '" + def.name + "' must reference one or two series");
            }
            if ((def.sources.size() == 2) != def.transform.uses_second_series()) {
                throw ConfigError("variable '" + def.name + "': second series and transform steps disagree");
            }
            for (int k : detail::get_or<std::vector<int>>(v, "variants", {0})) {
                if (k < 0 || k > 2) throw ConfigError("variable '" + def.name + "': variants must be 0, 1 or 2");
                auto var = def.with_differencing(k);
                if (!names.insert(var.name).second) throw ConfigError("duplicate variable name '" + var.name + "'");
                cfg.variables.push_back(std::move(var));
            }
        }
        cfg.dependent = j.at("dependent").get<std::string>();
        cfg.variable(cfg.dependent);

        for (const auto& f : j.at("families")) {
            FamilyRule r;
            r.name = f.at("name").get<std::string>();
            r.activity = f.at("activity").get<std::vector<std::string>>();
            r.controls = detail::get_or<std::vector<std::string>>(f, "controls", {});
            for (const auto& a : r.activity) {
                if (cfg.variable(a).role != Role::factor) throw ConfigError("'" + a + "' is not an activity variable");
            }
            for (const auto& c : r.controls) {
                if (cfg.variable(c).role != Role::control) throw ConfigError("'" + c + "' is not a control variable");
            }
            cfg.families.push_back(std::move(r));
        }

        if (j.contains("backtest")) {
            const auto& b = j.at("backtest");
            auto& bt = cfg.backtest;
            bt.min_df = detail::get_or(b, "min_df", bt.min_df);
            bt.half_life_years = detail::get_or(b, "half_life_years", bt.half_life_years);
            bt.horizons = detail::get_or(b, "horizons", bt.horizons);
            bt.clock_checks_per_quarter = detail::get_or(b, "clock_checks_per_quarter", bt.clock_checks_per_quarter);
            if (b.contains("start")) bt.start = parse_date(b.at("start").get<std::string>());
            if (b.contains("end")) bt.end = parse_date(b.at("end").get<std::string>());
            const auto realized = detail::get_or<std::string>(b, "realized", "latest");
            if (realized == "latest") {
                bt.realized = RealizedVintage::latest;
            } else if (realized == "first_release") {
                bt.realized = RealizedVintage::first_release;
            } else {
                throw ConfigError("backtest.realized must be 'latest' or 'first_release'");
            }
            bt.ml_opts.max_iters = detail::get_or(b, "ml_max_iters", bt.ml_opts.max_iters);
        }
        cfg.backtest.validate();

        for (const auto& m : j.at("methodologies").get<std::vector<std::string>>()) {
            const auto id = parse_methodology(m);
            if (is_univariate(id)) throw ConfigError("'" + m + "' is univariate; list it under \"univariate\"");
            cfg.methodologies.push_back(id);
        }
        for (const auto& m : detail::get_or<std::vector<std::string>>(j, "univariate", {})) {
            const auto id = parse_methodology(m);
            if (!is_univariate(id)) throw ConfigError("'" + m + "' is not univariate");
            cfg.univariate.push_back(id);
        }

        auto& ev = cfg.evaluation;
        ev.horizons = cfg.backtest.horizons;
        for (auto m : cfg.univariate) ev.univariates.push_back(label(m));
        if (j.contains("evaluation")) {
            const auto& e = j.at("evaluation");
            ev.benchmark = label(parse_methodology(detail::get_or<std::string>(e, "benchmark", "MA(1)")));
            ev.significance = detail::get_or(e, "significance", ev.significance);
            ev.threshold = detail::get_or(e, "threshold", ev.threshold);
            for (const auto& g : detail::get_or<nlohmann::json>(e, "rank_groups", nlohmann::json::array())) {
                eval::RankGroup rg{g.at("name").get<std::string>(), {}};
                for (const auto& m : g.at("methodologies").get<std::vector<std::string>>()) {
                    rg.methodologies.push_back(label(parse_methodology(m)));
                }
                ev.groups.push_back(std::move(rg));
            }
            for (const auto& m : detail::get_or<std::vector<std::string>>(e, "effect_methodologies", {})) {
                ev.effect_methodologies.push_back(label(parse_methodology(m)));
            }
        }
        auto ran = [&](const std::string& lbl) {
            const auto id = parse_methodology(lbl);
            const auto& pool = is_univariate(id) ? cfg.univariate : cfg.methodologies;
            return std::find(pool.begin(), pool.end(), id) != pool.end();
        };
        if (!ran(ev.benchmark)) throw ConfigError("benchmark " + ev.benchmark + " is not in the univariate list");
        for (const auto& g : ev.groups) {
            for (const auto& m : g.methodologies) {
                if (!ran(m)) throw ConfigError("rank group '" + g.name + "' uses " + m + ", which is not run");
            }
        }
        for (const auto& m : ev.effect_methodologies) {
            if (!ran(m)) throw ConfigError("effect methodology " + m + " is not run");
        }

        cfg.output_dir = base_dir / detail::get_or<std::string>(j, "output_dir", "out");
        cfg.parallel = detail::get_or(j, "parallel", 1);
        if (cfg.parallel < 1) throw ConfigError("parallel must be >= 1");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config") + (source.empty() ? "" : " " + source.string()) + ": " + e.what());
    }
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.parent_path(), path);
}

}  // namespace lvpc
