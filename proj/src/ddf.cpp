#include "fgddf/ddf.hpp"

#include <algorithm>

namespace fgddf {

std::size_t FusionMessage::scalar_count() const {
    std::size_t total = 0;
    for (const auto& f : factors) {
        const auto n = static_cast<std::size_t>(f.dim());
        total += n + n * (n + 1) / 2;
    }
    return total;
}

ChannelFilter::ChannelFilter(AgentId owner, AgentId peer, Scope common_vars, const std::vector<CanonicalFactor>& initial)
    : owner_(owner), peer_(peer), common_(canonical_scope(std::move(common_vars))) {
    for (const auto& v : common_) graph_.add_variable(v);
    for (const auto& f : initial) record(f);
}

NameList ChannelFilter::common_names() const {
    NameList out;
    for (const auto& v : common_) out.push_back(v.name);
    return out;
}

void ChannelFilter::record(const CanonicalFactor& f) {
    for (const auto& v : f.scope())
        if (!graph_.has_variable(v.name))
            throw ProtocolError("factor variable '" + v.name + "' is outside the common set of link " +
                                std::to_string(owner_) + "-" + std::to_string(peer_));
    graph_.add_factor(f);
}

bool ChannelFilter::mark_delivered(AgentId sender, int step) { return delivered_.emplace(sender, step).second; }

CanonicalFactor marginal_by_rollup(const FactorGraph& g, const NameList& keep) {
    FactorGraph copy = g;
    for (const auto& name : g.variable_names())
        if (std::find(keep.begin(), keep.end(), name) == keep.end()) rollup(copy, name);
    return copy.joint();
}

FusionMessage prepare_message(const FactorGraph& local, ChannelFilter& cf, int step) {
    const NameList common = cf.common_names();
    for (const auto& name : common)
        if (!local.has_variable(name))
            throw ProtocolError("common variable '" + name + "' is not in the local graph");

    CanonicalFactor marginal;
    try {
        marginal = marginal_by_rollup(local, common);
    } catch (const SingularBlock& e) {
        throw FusionDeferred(std::string("link ") + std::to_string(cf.owner()) + "->" + std::to_string(cf.peer()) +
                             " deferred: " + e.what());
    }
    CanonicalFactor fresh = factor_subtract(marginal, cf.graph().joint());
    cf.record(fresh);

    FusionMessage msg;
    msg.sender = cf.owner();
    msg.receiver = cf.peer();
    msg.step = step;
    msg.factors.push_back(std::move(fresh));
    return msg;
}

void fuse_message(FactorGraph& local, ChannelFilter& cf, const FusionMessage& msg) {
    if (msg.receiver != cf.owner() || msg.sender != cf.peer())
        throw ProtocolError("message " + std::to_string(msg.sender) + "->" + std::to_string(msg.receiver) +
                            " does not belong to link " + std::to_string(cf.owner()) + "-" + std::to_string(cf.peer()));
    for (const auto& f : msg.factors)
        for (const auto& v : f.scope()) {
            if (!cf.graph().has_variable(v.name))
                throw ProtocolError("message factor over '" + v.name + "' leaves the common set");
            if (cf.graph().variable(v.name).dim != v.dim)
                throw ProtocolError("message factor disagrees on dim of '" + v.name + "'");
            if (!local.has_variable(v.name))
                throw ProtocolError("message factor over '" + v.name + "' is unknown to the local graph");
        }
    if (!cf.mark_delivered(msg.sender, msg.step))
        throw ProtocolError("duplicate message from " + std::to_string(msg.sender) + " at step " +
                            std::to_string(msg.step));
    for (const auto& f : msg.factors) {
        local.add_factor(f);
        cf.record(f);
    }
}

CanonicalFactor homogeneous_cf_fuse(const CanonicalFactor& local_i, const CanonicalFactor& local_j,
                                    const CanonicalFactor& common) {
    if (local_i.scope() != local_j.scope() || local_i.scope() != common.scope())
        throw DimensionMismatch("homogeneous fusion needs identical scopes");
    return factor_subtract(factor_add(local_i, local_j), common);
}

}  // namespace fgddf
