#pragma once

#include <map>
#include <string>
#include <vector>

#include "fgddf/canonical.hpp"
#include "fgddf/factor_graph.hpp"

namespace fgddf {

enum class InferenceMethod {
    /// Dense joint of all factors, inverted once. The correctness anchor.
    Reference,
    /// Gaussian sum-product on the factor graph, after merging cycle variables
    /// into cliques until the graph is a tree.
    SumProduct,
};

/**
 * Factor graph whose variable nodes are groups (cliques) of the original
 * variables. Built by repeatedly merging every clique on a cycle into one
 * until the bipartite graph is a forest. Factors with the same clique
 * adjacency are summed into one.
 */
struct CliqueGraph {
    std::vector<Scope> cliques;
    std::vector<CanonicalFactor> factors;
    /// Clique indices adjacent to each factor, ascending.
    std::vector<std::vector<int>> factor_cliques;

    bool is_tree() const;
    int clique_of(std::string_view name) const;
};

CliqueGraph form_cliques(const FactorGraph& g);

/// Per-query moment-form marginals. Throws ImproperPosterior when the joint
/// (or a clique belief) is not SPD.
std::map<std::string, MomentGaussian> infer_marginals(const FactorGraph& g, const NameList& queries,
                                                      InferenceMethod method = InferenceMethod::Reference);

/// Full moment form of the joint (reference path), used by metrics.
MomentGaussian joint_moment(const FactorGraph& g);

}  // namespace fgddf
