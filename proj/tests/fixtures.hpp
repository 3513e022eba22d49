// Graph and network fixtures shared by the unit tests and the acceptance binary.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "fgddf/agent.hpp"
#include "fgddf/factor_graph.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace fgddf;

inline CanonicalFactor random_prior(const VariableId& v, std::mt19937_64& rng, double floor = 0.5) {
    return from_moment({{v}, oracle::random_vector(v.dim, rng) * 3.0, oracle::random_spd(v.dim, rng, floor)});
}

inline LinearMeasurement random_measurement(int rows, int cols, std::mt19937_64& rng) {
    return {oracle::random_matrix(rows, cols, rng), oracle::random_spd(rows, rng, 0.5),
            oracle::random_vector(rows, rng)};
}

/**
 * Local graph of the middle agent i of a j - i - k network after fusing one
 * message from each neighbor. Local variables XL tie to every common set
 * through local measurements; the j message spans {Xijk, Xij} and the k
 * message spans {Xijk, Xik}, which closes loops through XL.
 */
inline FactorGraph jik_local_graph(std::mt19937_64& rng) {
    FactorGraph g;
    const std::vector<VariableId> vars = {{"XL", 2}, {"Xijk", 2}, {"Xij", 1}, {"Xik", 2}};
    for (const auto& v : vars) g.add_variable(v);
    for (const auto& v : vars) g.add_factor(random_prior(v, rng));
    measurement_update(g, {"XL", "Xijk"}, random_measurement(2, 4, rng));
    measurement_update(g, {"XL", "Xij"}, random_measurement(2, 3, rng));
    measurement_update(g, {"XL", "Xik"}, random_measurement(2, 4, rng));
    // Fused messages: SPD information over the neighbor's common set.
    g.add_factor(CanonicalFactor({{"Xijk", 2}, {"Xij", 1}}, oracle::random_vector(3, rng),
                                 oracle::random_spd(3, rng, 0.2)));
    g.add_factor(CanonicalFactor({{"Xijk", 2}, {"Xik", 2}}, oracle::random_vector(4, rng),
                                 oracle::random_spd(4, rng, 0.2)));
    return g;
}

/// Random graph over `nvars` variables with priors and `nfactors` random 2-3 variable measurements.
inline FactorGraph random_graph(int nvars, int nfactors, std::mt19937_64& rng) {
    FactorGraph g;
    std::uniform_int_distribution<int> dim(1, 2), pick(0, nvars - 1), arity(2, 3);
    std::vector<VariableId> vars;
    for (int i = 0; i < nvars; ++i) vars.push_back({"v" + std::to_string(i), dim(rng)});
    for (const auto& v : vars) {
        g.add_variable(v);
        g.add_factor(random_prior(v, rng));
    }
    for (int f = 0; f < nfactors; ++f) {
        NameList names;
        int cols = 0;
        const int a = arity(rng);
        while (static_cast<int>(names.size()) < a) {
            const auto& v = vars[static_cast<std::size_t>(pick(rng))];
            if (std::find(names.begin(), names.end(), v.name) != names.end()) continue;
            names.push_back(v.name);
            cols += v.dim;
        }
        measurement_update(g, names, random_measurement(2, cols, rng));
    }
    return g;
}

}  // namespace fixtures
