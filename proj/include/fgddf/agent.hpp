/**
 * @file agent.hpp
 * @brief Per-agent fusion loop over a simulated tree network.
 *
 * Each time step runs in synchronous rounds with two barriers: every agent
 * applies its measurements and prepares one message per neighbor from its
 * pre-exchange graph, then every agent fuses its inbox. The phases are
 * independent across agents and can run on an OpenMP team; the serial path is
 * kept as the reference and produces bit-identical results.
 */
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fgddf/canonical.hpp"
#include "fgddf/ddf.hpp"
#include "fgddf/factor_graph.hpp"

namespace fgddf {

enum class ExecutionPolicy { Serial, Parallel };

struct Observation {
    NameList vars;  // column order of m.H
    LinearMeasurement m;
};

struct AgentState {
    AgentId id = 0;
    NameList chi_local;
    std::map<AgentId, NameList> chi_common;
    FactorGraph graph;
    std::map<AgentId, ChannelFilter> channels;

    /// chi_local plus every common set, sorted.
    NameList variables() const { return graph.variable_names(); }
};

/**
 * Builds an agent over `variables` with the given prior factors in its graph.
 * Each neighbor gets a channel filter over `common[neighbor]`, seeded with the
 * prior factors whose scope lies inside that common set (the shared prior is
 * common information from the start).
 */
AgentState make_agent(AgentId id, const Scope& variables, const std::vector<CanonicalFactor>& priors,
                      const std::map<AgentId, NameList>& common);

/// Measurement updates, then one message per neighbor. Deferred links are
/// skipped and reported through `deferred` when given.
std::vector<FusionMessage> send_phase(AgentState& a, const std::vector<Observation>& observations, int step,
                                      std::vector<AgentId>* deferred = nullptr);

void fuse_phase(AgentState& a, const std::vector<FusionMessage>& inbox);

/// One full step for a single agent: measure, send, then fuse `inbox`.
std::vector<FusionMessage> agent_step(AgentState& a, const std::vector<Observation>& observations,
                                      const std::vector<FusionMessage>& inbox, int step);

struct NetworkTopology {
    std::vector<AgentId> agents;
    std::vector<std::pair<AgentId, AgentId>> links;

    /// Throws TopologyError unless the links form a spanning tree over `agents`.
    void validate() const;
    std::vector<AgentId> neighbors(AgentId id) const;
    int diameter() const;
    /// Hop distance between two agents (tree path length).
    int distance(AgentId a, AgentId b) const;
};

struct AgentSnapshot {
    AgentId agent = 0;
    MomentGaussian posterior;  // over the agent's full local variable set
    std::size_t msg_scalars_sent = 0;
};

struct StepRecord {
    int step = 0;
    std::vector<AgentSnapshot> agents;
    std::vector<FusionMessage> messages;
};

struct RunTrace {
    std::vector<StepRecord> steps;
    /// Ground truth per variable, when known (simulation).
    std::map<std::string, Eigen::VectorXd> truth;

    std::size_t total_scalars_sent() const;
};

using ObservationSource = std::function<std::vector<Observation>(AgentId, int step)>;

struct NetworkOptions {
    /// Send/fuse rounds per time step; measurements are applied in the first round only.
    int exchange_rounds = 1;
    ExecutionPolicy policy = ExecutionPolicy::Serial;
    bool keep_messages = false;
};

/// Drives every agent for `steps` steps (numbered 1..steps). Agents must be
/// ordered like `topology.agents`.
RunTrace run_network(const NetworkTopology& topology, std::vector<AgentState>& agents, int steps,
                     const ObservationSource& obs_source, const NetworkOptions& options = {});

/// RunTrace streamed as CSV: step,agent,variable,mean,cov_diag,nees,msg_scalars_sent.
/// Vector fields are space separated; nees is empty without truth.
std::string trace_to_csv(const RunTrace& trace);

/// NEES of a moment Gaussian against the truth map.
double nees(const MomentGaussian& g, const std::map<std::string, Eigen::VectorXd>& truth);

}  // namespace fgddf
