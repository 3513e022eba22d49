/**
 * @file ddf.hpp
 * @brief Channel-filter bookkeeping and heterogeneous-state fusion over factor graphs.
 *
 * Each link of a tree network carries a ChannelFilter: a factor graph over the
 * variables the two endpoint agents have in common, holding every factor that
 * has ever been sent or received on that link. Sending marginalizes the local
 * graph onto the common set and subtracts the channel filter's joint, so only
 * new information leaves the agent. Receiving adds the incoming factor to both
 * the local graph and the channel filter.
 */
#pragma once

#include <set>
#include <utility>
#include <vector>

#include "fgddf/canonical.hpp"
#include "fgddf/factor_graph.hpp"

namespace fgddf {

using AgentId = int;

struct FusionMessage {
    AgentId sender = 0;
    AgentId receiver = 0;
    int step = 0;
    std::vector<CanonicalFactor> factors;

    /// Scalars on the wire: n + n(n+1)/2 per factor of dimension n.
    std::size_t scalar_count() const;
};

class ChannelFilter {
public:
    ChannelFilter() = default;
    /// Registers the common variables; `initial` (e.g. the shared prior over
    /// them) is added as already-common information when given.
    ChannelFilter(AgentId owner, AgentId peer, Scope common_vars,
                  const std::vector<CanonicalFactor>& initial = {});

    AgentId owner() const { return owner_; }
    AgentId peer() const { return peer_; }
    const Scope& common_vars() const { return common_; }
    NameList common_names() const;
    const FactorGraph& graph() const { return graph_; }

    /// Records an exchanged factor. Scope must be within the common set.
    void record(const CanonicalFactor& f);

    /// True the first time a (sender, step) pair is seen for this link.
    bool mark_delivered(AgentId sender, int step);

private:
    AgentId owner_ = 0;
    AgentId peer_ = 0;
    Scope common_;
    FactorGraph graph_;
    std::set<std::pair<AgentId, int>> delivered_;
};

/**
 * Marginalize `local` onto the channel's common variables by repeated
 * roll-up, subtract the channel filter joint, record the difference in the
 * channel filter and return it as a one-factor message. `local` is not
 * modified. Throws FusionDeferred (channel filter untouched) when the
 * roll-up hits a singular block.
 */
FusionMessage prepare_message(const FactorGraph& local, ChannelFilter& cf, int step);

/// Add every factor of `msg` to the local graph and to the channel filter.
/// Throws ProtocolError (nothing applied) on misaddressing, scope violation or
/// duplicate delivery.
void fuse_message(FactorGraph& local, ChannelFilter& cf, const FusionMessage& msg);

/// Homogeneous channel-filter fusion: local_i + local_j - common, identical scopes.
CanonicalFactor homogeneous_cf_fuse(const CanonicalFactor& local_i, const CanonicalFactor& local_j,
                                    const CanonicalFactor& common);

/// Marginal of a factor graph onto `keep` computed by rolling up every other variable.
CanonicalFactor marginal_by_rollup(const FactorGraph& g, const NameList& keep);

}  // namespace fgddf
