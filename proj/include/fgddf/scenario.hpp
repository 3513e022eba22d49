#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fgddf/agent.hpp"
#include "fgddf/canonical.hpp"

namespace fgddf {

enum class FusionMode { Heterogeneous, Homogeneous, Centralized };

FusionMode parse_mode(const std::string& s);
std::string to_string(FusionMode m);

struct VariableSpec {
    std::string name;
    int dim = 1;
    Eigen::VectorXd prior_mean;
    Eigen::MatrixXd prior_cov;
};

/// Elliptical orbit: center + (rx cos, ry sin) of 2*pi*(t/period + phase).
struct Trajectory {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    Eigen::Vector2d radius = Eigen::Vector2d::Zero();
    double period = 1.0;
    double phase = 0.0;

    Eigen::Vector2d position(double t) const;
};

struct SensorSpec {
    std::string label;
    NameList vars;  // H column order
    Eigen::MatrixXd H;
    Eigen::MatrixXd R;
    /// When set, the sensor only fires while the true position (first two
    /// components) of `range_target` is within `range` of the agent.
    std::optional<double> range;
    std::string range_target;
};

struct AgentSpec {
    AgentId id = 0;
    NameList variables;
    std::optional<Trajectory> trajectory;
    std::vector<SensorSpec> sensors;
};

struct MonteCarloSettings {
    int runs = 50;
    std::uint64_t seed = 7;
};

struct ScenarioConfig {
    std::string kind = "custom";  // tracking | mapping | custom
    std::vector<VariableSpec> variables;
    std::vector<AgentSpec> agents;
    std::vector<std::pair<AgentId, AgentId>> links;
    int steps = 1;
    double dt = 1.0;
    int exchange_rounds = 1;
    MonteCarloSettings mc;
    /// Descriptive geometry (field size, sensing radius); not used by the filters.
    nlohmann::json geometry = nlohmann::json::object();

    const VariableSpec& variable(const std::string& name) const;
    const AgentSpec& agent(AgentId id) const;
    NetworkTopology topology() const;
    int global_dim() const;
    /// Local variable set of an agent under `mode` (all variables when homogeneous).
    NameList agent_variables(AgentId id, FusionMode mode) const;
    /// Variables shared by both endpoints of a link under `mode`.
    NameList common_variables(AgentId a, AgentId b, FusionMode mode) const;
};

/// Checks shapes, SPD priors and noise, tree topology, and that every
/// variable's holders form a connected subtree. Throws ConfigError/TopologyError.
void validate(const ScenarioConfig& cfg);

nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::string& path);

/// Five agents in a chain, six static 2D targets, per-agent 2D bias.
ScenarioConfig build_tracking_scenario();
/// Four agents orbiting in a 180 m x 160 m field mapping 25 landmarks with a
/// 45 m sensing radius and per-agent 2D bias.
ScenarioConfig build_mapping_scenario();

using Truth = std::map<std::string, Eigen::VectorXd>;

/// Deterministic generator for run `run` of seed `seed`.
std::mt19937_64 run_rng(std::uint64_t seed, int run);

Truth sample_truth(const ScenarioConfig& cfg, std::mt19937_64& rng);

/// observations[step-1][agent index] for the whole run; independent of fusion mode.
using ObservationSchedule = std::vector<std::vector<std::vector<Observation>>>;
ObservationSchedule generate_observations(const ScenarioConfig& cfg, const Truth& truth, std::mt19937_64& rng);

std::vector<CanonicalFactor> prior_factors(const ScenarioConfig& cfg);

/// Agents set up for `mode` (Heterogeneous or Homogeneous), in topology order.
std::vector<AgentState> build_agents(const ScenarioConfig& cfg, FusionMode mode);

/// One simulated run: truth and noise from run_rng(seed, run).
RunTrace run_scenario(const ScenarioConfig& cfg, FusionMode mode, std::uint64_t seed, int run = 0,
                      ExecutionPolicy policy = ExecutionPolicy::Serial, bool keep_messages = false);

/// Single filter over the full global state consuming every agent's
/// measurements. Reported as agent 0.
RunTrace centralized_baseline(const ScenarioConfig& cfg, std::uint64_t seed, int run = 0);

}  // namespace fgddf
