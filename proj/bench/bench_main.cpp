// Serial reference vs OpenMP paths, plus the two inference methods.
// Thread count follows OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include <random>

#include "fgddf/inference.hpp"
#include "fgddf/metrics.hpp"

using namespace fgddf;

namespace {

ScenarioConfig short_scenario(bool mapping, int steps) {
    ScenarioConfig cfg = mapping ? build_mapping_scenario() : build_tracking_scenario();
    cfg.steps = steps;
    return cfg;
}

void BM_MonteCarlo(benchmark::State& state, bool mapping, ExecutionPolicy policy) {
    const ScenarioConfig cfg = short_scenario(mapping, mapping ? 30 : 50);
    MonteCarloOptions opt;
    opt.runs = static_cast<int>(state.range(0));
    opt.policy = policy;
    for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(cfg, opt));
    state.SetItemsProcessed(state.iterations() * opt.runs);
}

// Agents of one run stepped serially or on an OpenMP team.
void BM_AgentNetwork(benchmark::State& state, ExecutionPolicy policy) {
    const ScenarioConfig cfg = short_scenario(true, 30);
    for (auto _ : state) benchmark::DoNotOptimize(run_scenario(cfg, FusionMode::Heterogeneous, 7, 0, policy));
}

// Local graph of mapping agent 2 after a run, queried for every variable.
void BM_Inference(benchmark::State& state, InferenceMethod method) {
    const ScenarioConfig cfg = short_scenario(true, 20);
    auto agents = build_agents(cfg, FusionMode::Heterogeneous);
    auto rng = run_rng(7, 0);
    const Truth truth = sample_truth(cfg, rng);
    const ObservationSchedule obs = generate_observations(cfg, truth, rng);
    run_network(cfg.topology(), agents, cfg.steps, [&](AgentId id, int step) {
        return obs[static_cast<std::size_t>(step - 1)][static_cast<std::size_t>(id - 1)];
    });
    const FactorGraph& g = agents[1].graph;
    const NameList q = g.variable_names();
    for (auto _ : state) benchmark::DoNotOptimize(infer_marginals(g, q, method));
    state.counters["factors"] = static_cast<double>(g.num_factors());
}

}  // namespace

BENCHMARK_CAPTURE(BM_MonteCarlo, tracking_serial, false, ExecutionPolicy::Serial)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_MonteCarlo, tracking_parallel, false, ExecutionPolicy::Parallel)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_MonteCarlo, mapping_serial, true, ExecutionPolicy::Serial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_MonteCarlo, mapping_parallel, true, ExecutionPolicy::Parallel)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_AgentNetwork, serial, ExecutionPolicy::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_AgentNetwork, parallel, ExecutionPolicy::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Inference, reference, InferenceMethod::Reference)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_Inference, sum_product, InferenceMethod::SumProduct)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
