#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fgddf/agent.hpp"
#include "fgddf/scenario.hpp"

namespace fgddf {

/// Communication and computation counters for one run.
struct CostLedger {
    /// Scalars sent per agent (n + n(n+1)/2 per factor), in topology order.
    std::vector<std::size_t> comm_scalars;
    /// One full-state message per link direction per step.
    std::vector<std::size_t> comm_scalars_homogeneous;
    /// Local joint dimension per agent.
    std::vector<int> comp_state_dim;
    int global_dim = 0;

    /// Total heterogeneous over total homogeneous scalars.
    double comm_ratio() const;
    /// max_i n_i^3 / N^3 (dense inference cost of the largest local joint).
    double comp_ratio() const;
    /// max_i n_i / N.
    double comp_dim_ratio() const;
    /// Largest per-message scalar count implied by the common sets; filled by compute_costs.
    int max_common_dim = 0;
};

/// Costs of a traced run of `cfg` under `mode`. Agents in the trace must follow cfg.agents order.
CostLedger compute_costs(const ScenarioConfig& cfg, const RunTrace& trace,
                         FusionMode mode = FusionMode::Heterogeneous);

struct RunMetrics {
    int runs = 0;
    std::vector<AgentId> agents;
    /// rmse[agent index][variable][step-1] over runs.
    std::vector<std::map<std::string, std::vector<double>>> rmse;
    /// nees[agent index][step-1], run average over the agent's full local state.
    std::vector<std::vector<double>> nees;
    /// State dimension behind each nees row.
    std::vector<int> nees_dim;
    /// Fraction of scalar components within 2 sigma of truth.
    double coverage = 0.0;
    CostLedger costs;
    /// Min eigenvalue of P_agent - P_central over all runs, agents and steps, when checked.
    std::optional<double> min_conservative_eig;

    bool empty() const { return runs == 0; }
    /// Step- and run-averaged RMSE of one variable at one agent.
    double mean_rmse(AgentId agent, const std::string& var) const;
};

struct MonteCarloOptions {
    FusionMode mode = FusionMode::Heterogeneous;
    int runs = 50;
    std::uint64_t seed = 7;
    /// Parallel runs the Monte Carlo loop on an OpenMP team; the agents inside
    /// each run stay serial.
    ExecutionPolicy policy = ExecutionPolicy::Parallel;
    bool check_conservative = false;
};

RunMetrics run_monte_carlo(const ScenarioConfig& cfg, const MonteCarloOptions& options);

/// Two-sided chi-square interval for the run-average of NEES with `dim` dofs.
std::pair<double, double> nees_interval(int dim, int runs, double confidence = 0.95);

/// agent,variable,step,rmse,nees
std::string metrics_to_csv(const RunMetrics& m);

nlohmann::json costs_to_json(const CostLedger& c);
nlohmann::json summary_json(const ScenarioConfig& cfg, const MonteCarloOptions& options, const RunMetrics& m);

}  // namespace fgddf
