// fgddf: run scenarios, Monte Carlo batches and cost reports.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "fgddf/errors.hpp"
#include "fgddf/metrics.hpp"
#include "fgddf/scenario.hpp"

namespace fs = std::filesystem;
using namespace fgddf;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kConfig = 2, kNumerical = 3 };

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int runs = 0;
    bool runs_set = false;
    std::string out_dir;
    std::string mode = "heterogeneous";
};

std::optional<fs::path> output_dir(const Common& c) {
    if (const char* env = std::getenv("FGDDF_OUT_DIR"); env && *env) return fs::path(env);
    if (!c.out_dir.empty()) return fs::path(c.out_dir);
    return std::nullopt;
}

void emit(const std::optional<fs::path>& dir, const std::string& file, const std::string& text) {
    if (!dir) {
        std::cout << text;
        return;
    }
    fs::create_directories(*dir);
    std::ofstream out(*dir / file, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + (*dir / file).string() + "'");
    out << text;
}

ScenarioConfig load_valid(const std::string& path) {
    ScenarioConfig cfg = load_scenario(path);
    validate(cfg);
    return cfg;
}

int cmd_run(const Common& c, int run_index) {
    const ScenarioConfig cfg = load_valid(c.config);
    const std::uint64_t seed = c.seed_set ? c.seed : cfg.mc.seed;
    const RunTrace trace = run_scenario(cfg, parse_mode(c.mode), seed, run_index);
    emit(output_dir(c), "trace.csv", trace_to_csv(trace));
    return kOk;
}

int cmd_mc(const Common& c, bool serial) {
    const ScenarioConfig cfg = load_valid(c.config);
    MonteCarloOptions opt;
    opt.mode = parse_mode(c.mode);
    opt.runs = c.runs_set ? c.runs : cfg.mc.runs;
    opt.seed = c.seed_set ? c.seed : cfg.mc.seed;
    opt.policy = serial ? ExecutionPolicy::Serial : ExecutionPolicy::Parallel;
    const RunMetrics m = run_monte_carlo(cfg, opt);
    const auto dir = output_dir(c);
    const std::string summary = summary_json(cfg, opt, m).dump(2) + "\n";
    if (dir) {
        emit(dir, "metrics.csv", metrics_to_csv(m));
        emit(dir, "summary.json", summary);
    } else {
        std::cout << summary;
    }
    return kOk;
}

int cmd_costs(const Common& c) {
    const ScenarioConfig cfg = load_valid(c.config);
    const FusionMode mode = parse_mode(c.mode);
    if (mode == FusionMode::Centralized) throw ConfigError("costs are defined for the distributed modes only");
    const std::uint64_t seed = c.seed_set ? c.seed : cfg.mc.seed;
    const RunTrace trace = run_scenario(cfg, mode, seed, 0);
    nlohmann::json j = costs_to_json(compute_costs(cfg, trace, mode));
    j["kind"] = cfg.kind;
    j["mode"] = to_string(mode);
    j["steps"] = cfg.steps;
    emit(output_dir(c), "costs.json", j.dump(2) + "\n");
    return kOk;
}

int cmd_validate(const Common& c) {
    ScenarioConfig cfg;
    try {
        cfg = load_scenario(c.config);
    } catch (const ConfigError& e) {
        // Unreadable or non-JSON input is a config error, not an invalid scenario.
        if (!fs::exists(c.config)) throw;
        std::cerr << "invalid: " << e.what() << '\n';
        return kInvalid;
    }
    try {
        validate(cfg);
    } catch (const Error& e) {
        std::cerr << "invalid: " << e.what() << '\n';
        return kInvalid;
    }
    std::cout << "ok: " << cfg.kind << ", " << cfg.agents.size() << " agents, " << cfg.variables.size()
              << " variables, " << cfg.global_dim() << " scalars\n";
    return kOk;
}

int cmd_scenario(const std::string& which, const Common& c) {
    ScenarioConfig cfg;
    if (which == "tracking")
        cfg = build_tracking_scenario();
    else if (which == "mapping")
        cfg = build_mapping_scenario();
    else
        throw ConfigError("unknown built-in scenario '" + which + "'");
    emit(output_dir(c), which + ".json", scenario_to_json(cfg).dump(2) + "\n");
    return kOk;
}

void add_config(CLI::App* sub, Common& c) {
    sub->add_option("config,--config,-c", c.config, "scenario JSON file");
}

void add_seed(CLI::App* sub, Common& c) {
    sub->add_option_function<std::uint64_t>(
           "--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_set = true; }, "random seed (default: config mc.seed)")
        ->check(CLI::PositiveNumber);
}

void add_mode(CLI::App* sub, Common& c) {
    sub->add_option("--mode", c.mode, "fusion mode")
        ->check(CLI::IsMember({"heterogeneous", "homogeneous", "centralized"}));
}

void add_out(CLI::App* sub, Common& c) {
    sub->add_option("--out-dir", c.out_dir, "write outputs here instead of stdout (FGDDF_OUT_DIR overrides)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Factor-graph decentralized data fusion"};
    app.require_subcommand(1);
    Common c;

    auto* run = app.add_subcommand("run", "simulate one run and write its trace CSV");
    int run_index = 0;
    add_config(run, c);
    add_seed(run, c);
    add_mode(run, c);
    add_out(run, c);
    run->add_option("--run", run_index, "run index within the seed")->check(CLI::NonNegativeNumber);

    auto* mc = app.add_subcommand("mc", "Monte Carlo batch: metrics CSV and summary JSON");
    bool serial = false;
    add_config(mc, c);
    add_seed(mc, c);
    add_mode(mc, c);
    add_out(mc, c);
    mc->add_option_function<int>("--runs", [&c](int r) { c.runs = r, c.runs_set = true; }, "number of runs")
        ->check(CLI::PositiveNumber);
    mc->add_flag("--serial", serial, "run the batch on one thread");

    auto* costs = app.add_subcommand("costs", "communication and computation ledger");
    add_config(costs, c);
    add_seed(costs, c);
    add_mode(costs, c);
    add_out(costs, c);

    auto* val = app.add_subcommand("validate-config", "check schema and topology; exit 0 when valid, 1 otherwise");
    add_config(val, c);

    auto* scen = app.add_subcommand("scenario", "write a built-in scenario as JSON");
    std::string which;
    scen->add_option("name", which, "tracking | mapping")->required();
    add_out(scen, c);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*scen) return cmd_scenario(which, c);
        if (c.config.empty()) throw ConfigError("no scenario file given (--config)");
        if (*run) return cmd_run(c, run_index);
        if (*mc) return cmd_mc(c, serial);
        if (*costs) return cmd_costs(c);
        if (*val) return cmd_validate(c);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const TopologyError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    }
    return kOk;
}
