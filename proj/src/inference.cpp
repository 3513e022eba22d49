#include "fgddf/inference.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>

namespace fgddf {

namespace {

struct Bipartite {
    int num_cliques = 0;
    std::vector<std::vector<int>> adj;  // nodes [0, num_cliques) are cliques, the rest factors
};

Bipartite build_bipartite(const CliqueGraph& cg) {
    Bipartite b;
    b.num_cliques = static_cast<int>(cg.cliques.size());
    b.adj.resize(cg.cliques.size() + cg.factors.size());
    for (std::size_t f = 0; f < cg.factor_cliques.size(); ++f) {
        const int fn = b.num_cliques + static_cast<int>(f);
        for (int c : cg.factor_cliques[f]) {
            b.adj[static_cast<std::size_t>(fn)].push_back(c);
            b.adj[static_cast<std::size_t>(c)].push_back(fn);
        }
    }
    return b;
}

// Clique nodes on some cycle of the bipartite graph, or nullopt if it is a forest.
std::optional<std::vector<int>> find_cycle_cliques(const Bipartite& b) {
    const std::size_t n = b.adj.size();
    std::vector<int> parent(n, -1), depth(n, -1);
    std::optional<std::vector<int>> found;

    std::function<void(int)> dfs = [&](int u) {
        for (int w : b.adj[static_cast<std::size_t>(u)]) {
            if (found) return;
            if (w == parent[static_cast<std::size_t>(u)]) continue;
            if (depth[static_cast<std::size_t>(w)] < 0) {
                parent[static_cast<std::size_t>(w)] = u;
                depth[static_cast<std::size_t>(w)] = depth[static_cast<std::size_t>(u)] + 1;
                dfs(w);
            } else if (depth[static_cast<std::size_t>(w)] < depth[static_cast<std::size_t>(u)]) {
                std::vector<int> cliques;
                for (int x = u;; x = parent[static_cast<std::size_t>(x)]) {
                    if (x < b.num_cliques) cliques.push_back(x);
                    if (x == w) break;
                }
                found = std::move(cliques);
            }
        }
    };
    for (std::size_t s = 0; s < n && !found; ++s) {
        if (depth[s] >= 0) continue;
        depth[s] = 0;
        dfs(static_cast<int>(s));
    }
    return found;
}

// Sum factors with identical clique adjacency; factors come in with explicit adjacency.
void group_factors(CliqueGraph& cg) {
    std::map<std::vector<int>, std::size_t> by_adj;
    std::vector<CanonicalFactor> factors;
    std::vector<std::vector<int>> adjacency;
    for (std::size_t f = 0; f < cg.factors.size(); ++f) {
        auto [it, inserted] = by_adj.emplace(cg.factor_cliques[f], factors.size());
        if (inserted) {
            factors.push_back(cg.factors[f]);
            adjacency.push_back(cg.factor_cliques[f]);
        } else {
            factors[it->second] = factor_add(factors[it->second], cg.factors[f]);
        }
    }
    cg.factors = std::move(factors);
    cg.factor_cliques = std::move(adjacency);
}

void recompute_adjacency(CliqueGraph& cg) {
    std::map<std::string, int, std::less<>> owner;
    for (std::size_t c = 0; c < cg.cliques.size(); ++c)
        for (const auto& v : cg.cliques[c]) owner[v.name] = static_cast<int>(c);
    cg.factor_cliques.assign(cg.factors.size(), {});
    for (std::size_t f = 0; f < cg.factors.size(); ++f) {
        auto& adj = cg.factor_cliques[f];
        for (const auto& v : cg.factors[f].scope()) adj.push_back(owner.at(v.name));
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
}

void merge_cliques(CliqueGraph& cg, std::vector<int> members) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    Scope merged;
    for (int c : members) merged = scope_union(merged, cg.cliques[static_cast<std::size_t>(c)]);
    std::vector<Scope> next;
    next.reserve(cg.cliques.size() - members.size() + 1);
    for (std::size_t c = 0; c < cg.cliques.size(); ++c)
        if (!std::binary_search(members.begin(), members.end(), static_cast<int>(c))) next.push_back(cg.cliques[c]);
    next.push_back(std::move(merged));
    cg.cliques = std::move(next);
}

MomentGaussian checked_moment(const CanonicalFactor& f) {
    try {
        return to_moment(f);
    } catch (const NotADistribution&) {
        throw ImproperPosterior("posterior information matrix is not positive definite");
    }
}

}  // namespace

bool CliqueGraph::is_tree() const {
    return !find_cycle_cliques(build_bipartite(*this)).has_value();
}

int CliqueGraph::clique_of(std::string_view name) const {
    for (std::size_t c = 0; c < cliques.size(); ++c)
        for (const auto& v : cliques[c])
            if (v.name == name) return static_cast<int>(c);
    return -1;
}

CliqueGraph form_cliques(const FactorGraph& g) {
    CliqueGraph cg;
    for (const auto& v : g.variables()) cg.cliques.push_back({v});
    for (const auto& [_, f] : g.factors())
        if (!f.empty()) cg.factors.push_back(f);
    recompute_adjacency(cg);
    group_factors(cg);
    while (auto cycle = find_cycle_cliques(build_bipartite(cg))) {
        merge_cliques(cg, std::move(*cycle));
        recompute_adjacency(cg);
        group_factors(cg);
    }
    return cg;
}

MomentGaussian joint_moment(const FactorGraph& g) { return checked_moment(g.joint()); }

std::map<std::string, MomentGaussian> infer_marginals(const FactorGraph& g, const NameList& queries,
                                                      InferenceMethod method) {
    for (const auto& q : queries) g.variable(q);
    std::map<std::string, MomentGaussian> out;

    if (method == InferenceMethod::Reference) {
        const MomentGaussian joint = joint_moment(g);
        for (const auto& q : queries) out.emplace(q, joint.select(q));
        return out;
    }

    const CliqueGraph cg = form_cliques(g);
    const std::size_t nc = cg.cliques.size();
    const std::size_t nf = cg.factors.size();

    std::vector<Scope> factor_scope(nf);
    std::vector<std::vector<int>> clique_factors(nc);
    for (std::size_t f = 0; f < nf; ++f) {
        Scope s;
        for (int c : cg.factor_cliques[f]) s = scope_union(s, cg.cliques[static_cast<std::size_t>(c)]);
        factor_scope[f] = std::move(s);
        for (int c : cg.factor_cliques[f]) clique_factors[static_cast<std::size_t>(c)].push_back(static_cast<int>(f));
    }

    // Memoized messages keyed by (factor, clique) in each direction.
    std::map<std::pair<int, int>, CanonicalFactor> to_clique, to_factor;

    std::function<const CanonicalFactor&(int, int)> factor_to_clique;
    std::function<const CanonicalFactor&(int, int)> clique_to_factor;

    clique_to_factor = [&](int c, int f) -> const CanonicalFactor& {
        auto key = std::make_pair(f, c);
        if (auto it = to_factor.find(key); it != to_factor.end()) return it->second;
        CanonicalFactor msg = CanonicalFactor::zero(cg.cliques[static_cast<std::size_t>(c)]);
        for (int other : clique_factors[static_cast<std::size_t>(c)])
            if (other != f) msg = factor_add(msg, factor_to_clique(other, c));
        return to_factor.emplace(key, std::move(msg)).first->second;
    };

    factor_to_clique = [&](int f, int c) -> const CanonicalFactor& {
        auto key = std::make_pair(f, c);
        if (auto it = to_clique.find(key); it != to_clique.end()) return it->second;
        const auto fs = static_cast<std::size_t>(f);
        CanonicalFactor acc = cg.factors[fs].expanded(factor_scope[fs]);
        for (int other : cg.factor_cliques[fs])
            if (other != c) acc = factor_add(acc, clique_to_factor(other, f));
        NameList keep;
        for (const auto& v : cg.cliques[static_cast<std::size_t>(c)]) keep.push_back(v.name);
        CanonicalFactor msg;
        try {
            msg = marginalize(acc, keep);
        } catch (const SingularBlock&) {
            throw ImproperPosterior("sum-product message is singular; posterior is not proper");
        }
        return to_clique.emplace(key, std::move(msg)).first->second;
    };

    // Every clique belief is formed so an improper posterior is reported even
    // when it sits outside the queried cliques.
    std::vector<MomentGaussian> beliefs;
    beliefs.reserve(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        CanonicalFactor belief = CanonicalFactor::zero(cg.cliques[c]);
        for (int f : clique_factors[c]) belief = factor_add(belief, factor_to_clique(f, static_cast<int>(c)));
        beliefs.push_back(checked_moment(belief));
    }
    for (const auto& q : queries) out.emplace(q, beliefs[static_cast<std::size_t>(cg.clique_of(q))].select(q));
    return out;
}

}  // namespace fgddf
