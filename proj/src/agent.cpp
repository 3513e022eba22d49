#include "fgddf/agent.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <exception>
#include <iomanip>
#include <queue>
#include <set>
#include <sstream>

#include "fgddf/inference.hpp"

namespace fgddf {

namespace {

bool scope_within(const CanonicalFactor& f, const NameList& names) {
    return std::all_of(f.scope().begin(), f.scope().end(), [&](const VariableId& v) {
        return std::find(names.begin(), names.end(), v.name) != names.end();
    });
}

// Runs fn(i) for i in [0, n), optionally on an OpenMP team. The first
// exception (by index) is rethrown after the loop.
template <typename Fn>
void for_each_agent(std::size_t n, ExecutionPolicy policy, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long>(n);
    if (policy == ExecutionPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < count; ++i) {
            try {
                fn(static_cast<std::size_t>(i));
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    } else {
        for (long i = 0; i < count; ++i) {
            try {
                fn(static_cast<std::size_t>(i));
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string join(const Eigen::VectorXd& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v(i);
    return os.str();
}

}  // namespace

AgentState make_agent(AgentId id, const Scope& variables, const std::vector<CanonicalFactor>& priors,
                      const std::map<AgentId, NameList>& common) {
    AgentState a;
    a.id = id;
    for (const auto& v : canonical_scope(variables)) a.graph.add_variable(v);
    const NameList names = a.graph.variable_names();
    for (const auto& p : priors) {
        if (!scope_within(p, names))
            throw ConfigError("prior over variables outside agent " + std::to_string(id) + "'s set");
        a.graph.add_factor(p);
    }

    std::set<std::string> shared;
    for (const auto& [peer, vars] : common) {
        if (peer == id) throw TopologyError("agent " + std::to_string(id) + " cannot link to itself");
        Scope cs;
        for (const auto& name : vars) {
            cs.push_back(a.graph.variable(name));
            shared.insert(name);
        }
        std::vector<CanonicalFactor> seed;
        for (const auto& p : priors)
            if (scope_within(p, vars)) seed.push_back(p);
        a.chi_common[peer] = NameList(vars);
        std::sort(a.chi_common[peer].begin(), a.chi_common[peer].end());
        a.channels.emplace(peer, ChannelFilter(id, peer, std::move(cs), seed));
    }
    for (const auto& name : names)
        if (!shared.contains(name)) a.chi_local.push_back(name);
    return a;
}

std::vector<FusionMessage> send_phase(AgentState& a, const std::vector<Observation>& observations, int step,
                                      std::vector<AgentId>* deferred) {
    for (const auto& obs : observations) measurement_update(a.graph, obs.vars, obs.m);

    std::vector<FusionMessage> outbox;
    for (auto& [peer, cf] : a.channels) {
        try {
            FusionMessage msg = prepare_message(a.graph, cf, step);
            const NameList& allowed = a.chi_common.at(peer);
            for (const auto& f : msg.factors)
                if (!scope_within(f, allowed))
                    throw ProtocolError("agent " + std::to_string(a.id) + " produced a message outside its common set");
            outbox.push_back(std::move(msg));
        } catch (const FusionDeferred&) {
            if (deferred) deferred->push_back(peer);
        }
    }
    return outbox;
}

void fuse_phase(AgentState& a, const std::vector<FusionMessage>& inbox) {
    for (const auto& msg : inbox) {
        if (msg.receiver != a.id)
            throw ProtocolError("message for agent " + std::to_string(msg.receiver) + " delivered to " +
                                std::to_string(a.id));
        auto it = a.channels.find(msg.sender);
        if (it == a.channels.end())
            throw ProtocolError("agent " + std::to_string(a.id) + " has no link to " + std::to_string(msg.sender));
        fuse_message(a.graph, it->second, msg);
    }
}

std::vector<FusionMessage> agent_step(AgentState& a, const std::vector<Observation>& observations,
                                      const std::vector<FusionMessage>& inbox, int step) {
    auto outbox = send_phase(a, observations, step);
    fuse_phase(a, inbox);
    return outbox;
}

void NetworkTopology::validate() const {
    std::set<AgentId> ids(agents.begin(), agents.end());
    if (ids.size() != agents.size()) throw TopologyError("duplicate agent id");
    if (agents.empty()) {
        if (!links.empty()) throw TopologyError("links without agents");
        return;
    }
    if (links.size() + 1 != agents.size())
        throw TopologyError("a tree over " + std::to_string(agents.size()) + " agents needs " +
                            std::to_string(agents.size() - 1) + " links, got " + std::to_string(links.size()));
    std::set<std::pair<AgentId, AgentId>> seen;
    for (auto [a, b] : links) {
        if (!ids.contains(a) || !ids.contains(b)) throw TopologyError("link references unknown agent");
        if (a == b) throw TopologyError("self link on agent " + std::to_string(a));
        if (!seen.emplace(std::min(a, b), std::max(a, b)).second) throw TopologyError("duplicate link");
    }
    // Connected + |E| = |V| - 1 => tree.
    std::set<AgentId> reached{agents.front()};
    std::queue<AgentId> q;
    q.push(agents.front());
    while (!q.empty()) {
        const AgentId u = q.front();
        q.pop();
        for (AgentId w : neighbors(u))
            if (reached.insert(w).second) q.push(w);
    }
    if (reached.size() != agents.size()) throw TopologyError("network is not connected");
}

std::vector<AgentId> NetworkTopology::neighbors(AgentId id) const {
    std::vector<AgentId> out;
    for (auto [a, b] : links) {
        if (a == id) out.push_back(b);
        if (b == id) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
}

int NetworkTopology::distance(AgentId from, AgentId to) const {
    std::map<AgentId, int> dist{{from, 0}};
    std::queue<AgentId> q;
    q.push(from);
    while (!q.empty()) {
        const AgentId u = q.front();
        q.pop();
        if (u == to) return dist[u];
        for (AgentId w : neighbors(u))
            if (!dist.contains(w)) {
                dist[w] = dist[u] + 1;
                q.push(w);
            }
    }
    throw TopologyError("agents " + std::to_string(from) + " and " + std::to_string(to) + " are not connected");
}

int NetworkTopology::diameter() const {
    int d = 0;
    for (AgentId a : agents)
        for (AgentId b : agents) d = std::max(d, distance(a, b));
    return d;
}

std::size_t RunTrace::total_scalars_sent() const {
    std::size_t total = 0;
    for (const auto& s : steps)
        for (const auto& a : s.agents) total += a.msg_scalars_sent;
    return total;
}

RunTrace run_network(const NetworkTopology& topology, std::vector<AgentState>& agents, int steps,
                     const ObservationSource& obs_source, const NetworkOptions& options) {
    topology.validate();
    if (agents.size() != topology.agents.size()) throw TopologyError("agent list does not match topology");
    std::map<AgentId, std::size_t> index;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].id != topology.agents[i]) throw TopologyError("agents must be ordered like the topology");
        index[agents[i].id] = i;
        std::vector<AgentId> declared;
        for (const auto& [peer, _] : agents[i].channels) declared.push_back(peer);
        if (declared != topology.neighbors(agents[i].id))
            throw TopologyError("agent " + std::to_string(agents[i].id) + " channels do not match its links");
    }
    for (auto [a, b] : topology.links)
        if (agents[index[a]].chi_common.at(b) != agents[index[b]].chi_common.at(a))
            throw TopologyError("common variables of link " + std::to_string(a) + "-" + std::to_string(b) +
                                " differ between its endpoints");
    if (options.exchange_rounds < 1) throw ConfigError("exchange_rounds must be >= 1");

    const std::size_t n = agents.size();
    RunTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(std::max(steps, 0)));

    for (int step = 1; step <= steps; ++step) {
        std::vector<std::vector<Observation>> obs(n);
        if (obs_source)
            for (std::size_t i = 0; i < n; ++i) obs[i] = obs_source(agents[i].id, step);

        std::vector<std::size_t> sent(n, 0);
        StepRecord record;
        record.step = step;

        for (int round = 0; round < options.exchange_rounds; ++round) {
            const int seq = (step - 1) * options.exchange_rounds + round + 1;
            std::vector<std::vector<FusionMessage>> outbox(n);
            for_each_agent(n, options.policy, [&](std::size_t i) {
                static const std::vector<Observation> none;
                outbox[i] = send_phase(agents[i], round == 0 ? obs[i] : none, seq);
                for (const auto& m : outbox[i]) sent[i] += m.scalar_count();
            });

            std::vector<std::vector<FusionMessage>> inbox(n);
            for (std::size_t i = 0; i < n; ++i)
                for (auto& m : outbox[i]) {
                    inbox[index.at(m.receiver)].push_back(m);
                    if (options.keep_messages) record.messages.push_back(std::move(m));
                }

            for_each_agent(n, options.policy, [&](std::size_t i) { fuse_phase(agents[i], inbox[i]); });
        }

        record.agents.resize(n);
        for_each_agent(n, options.policy, [&](std::size_t i) {
            record.agents[i] = {agents[i].id, joint_moment(agents[i].graph), sent[i]};
        });
        trace.steps.push_back(std::move(record));
    }
    return trace;
}

double nees(const MomentGaussian& g, const std::map<std::string, Eigen::VectorXd>& truth) {
    Eigen::VectorXd err(g.mean.size());
    int off = 0;
    for (const auto& v : g.scope) {
        auto it = truth.find(v.name);
        if (it == truth.end()) throw ConfigError("no truth for variable '" + v.name + "'");
        err.segment(off, v.dim) = g.mean.segment(off, v.dim) - it->second;
        off += v.dim;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
    if (llt.info() != Eigen::Success) throw NotADistribution("covariance is not positive definite");
    return err.dot(llt.solve(err));
}

std::string trace_to_csv(const RunTrace& trace) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "step,agent,variable,mean,cov_diag,nees,msg_scalars_sent\n";
    for (const auto& s : trace.steps)
        for (const auto& a : s.agents) {
            std::string nees_field;
            if (!trace.truth.empty()) {
                std::ostringstream ns;
                ns << std::setprecision(17) << nees(a.posterior, trace.truth);
                nees_field = ns.str();
            }
            for (const auto& v : a.posterior.scope) {
                const MomentGaussian m = a.posterior.select(v.name);
                os << s.step << ',' << a.agent << ',' << v.name << ',' << join(m.mean) << ','
                   << join(m.covariance.diagonal()) << ',' << nees_field << ',' << a.msg_scalars_sent << '\n';
            }
        }
    return os.str();
}

}  // namespace fgddf
