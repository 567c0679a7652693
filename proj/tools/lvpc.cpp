#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "lvpc/lvpc.hpp"

namespace {

enum Exit { ok = 0, config_error = 1, partial_failure = 2 };

std::vector<lvpc::Methodology> parse_list(const std::string& csv) {
    std::vector<lvpc::Methodology> out;
    std::stringstream ss(csv);
    std::string item;
    // Labels such as "MAX(1,1)" contain commas, so split on ';' when present, otherwise on ','.
    const char sep = csv.find(';') != std::string::npos ? ';' : ',';
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(lvpc::parse_methodology(item));
    }
    if (out.empty()) throw lvpc::ConfigError("--methodologies is empty");
    return out;
}

void report_status(const char* what, const lvpc::pipeline::RunStatus& s) {
    std::fprintf(stderr, "%s: %d computed, %d skipped, %d failed\n", what, s.computed, s.skipped, s.failed);
}

void print_summary(const nlohmann::json& summary) {
    for (const auto& [group, methods] : summary.at("groups").items()) {
        std::printf("%s median rank by horizon\n", group.c_str());
        for (const auto& [m, v] : methods.items()) {
            std::printf("  %-14s", m.c_str());
            for (const auto& r : v.at("median_rank")) {
                if (r.is_null()) {
                    std::printf("     -");
                } else {
                    std::printf(" %5.1f", r.get<double>());
                }
            }
            std::printf("\n");
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent-variable Phillips curve forecasting backtests"};
    app.require_subcommand(1);

    std::string config_path;
    bool force = false;
    int parallel = 0;
    std::string only_spec, methodologies;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    };
    auto add_run = [&](CLI::App* sub) {
        sub->add_flag("--force", force, "recompute existing profiles");
        sub->add_option("--parallel", parallel, "worker threads (default: config value)")->check(CLI::PositiveNumber);
        sub->add_option("--only-spec", only_spec, "restrict to one spec id");
        sub->add_option("--methodologies", methodologies, "methodologies to run, comma or semicolon separated");
    };

    auto* ingest = app.add_subcommand("ingest", "load and validate vintage data, print per-series coverage");
    add_common(ingest);
    auto* backtest = app.add_subcommand("backtest", "generate forecast profiles");
    add_common(backtest);
    add_run(backtest);
    auto* evaluate = app.add_subcommand("evaluate", "score profiles and write reports");
    add_common(evaluate);
    evaluate->add_option("--only-spec", only_spec, "restrict to one spec id");
    auto* report = app.add_subcommand("report", "backtest then evaluate");
    add_common(report);
    add_run(report);

    std::string synth_dir = "synthetic";
    std::uint64_t seed = 1;
    auto* synth = app.add_subcommand("synth", "write the bundled synthetic economy (data.csv, config.json)");
    synth->add_option("--out", synth_dir, "output directory");
    synth->add_option("--seed", seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            lvpc::synthetic::Options o;
            o.seed = seed;
            lvpc::synthetic::write_economy(synth_dir, o);
            std::fprintf(stderr, "wrote %s/data.csv and %s/config.json\n", synth_dir.c_str(), synth_dir.c_str());
            return ok;
        }

        const auto cfg = lvpc::load_run_config(config_path);
        lvpc::pipeline::RunOptions opts;
        opts.force = force;
        opts.parallel = parallel;
        if (!only_spec.empty()) opts.only_spec = only_spec;
        if (!methodologies.empty()) opts.methodologies = parse_list(methodologies);

        if (ingest->parsed()) {
            const auto store = lvpc::pipeline::ingest(cfg);
            lvpc::pipeline::print_store_summary(std::cout, store);
            return ok;
        }
        int code = ok;
        if (backtest->parsed() || report->parsed()) {
            const auto status = lvpc::pipeline::cmd_backtest(cfg, opts, std::cerr);
            report_status("backtest", status);
            if (status.failed > 0) code = partial_failure;
        }
        if (evaluate->parsed() || report->parsed()) {
            lvpc::pipeline::RunOptions eval_opts;
            eval_opts.only_spec = opts.only_spec;
            const auto out = lvpc::pipeline::cmd_evaluate(cfg, eval_opts);
            print_summary(out.summary);
        }
        return code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return config_error;
    }
}
