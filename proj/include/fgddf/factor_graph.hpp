#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fgddf/canonical.hpp"

namespace fgddf {

using FactorId = std::uint64_t;

/**
 * Bipartite store of variable nodes and canonical factor nodes. Edges are
 * implicit: a factor is adjacent to every variable in its scope. The joint
 * density is the sum (in log space) of all factors.
 *
 * FactorIds are assigned monotonically and never reused. Single writer; the
 * caller serializes mutations.
 */
class FactorGraph {
public:
    void add_variable(VariableId v);
    bool has_variable(std::string_view name) const;
    const VariableId& variable(std::string_view name) const;
    /// Registered variables in canonical (name) order.
    Scope variables() const;
    NameList variable_names() const;
    std::size_t num_variables() const { return vars_.size(); }

    /// Removes a variable that has no incident factors.
    void remove_variable(std::string_view name);

    FactorId add_factor(CanonicalFactor f);
    void remove_factor(FactorId id);
    const CanonicalFactor& factor(FactorId id) const;
    const std::map<FactorId, CanonicalFactor>& factors() const { return factors_; }
    std::size_t num_factors() const { return factors_.size(); }

    std::vector<FactorId> adjacent_factors(std::string_view name) const;
    /// Variables that share at least one factor with `name`, excluding itself.
    NameList markov_blanket(std::string_view name) const;

    /// Aligned sum of every factor over every registered variable.
    CanonicalFactor joint() const;

    FactorId next_factor_id() const { return next_id_; }

private:
    std::map<std::string, VariableId, std::less<>> vars_;
    std::map<FactorId, CanonicalFactor> factors_;
    std::map<std::string, std::set<FactorId>, std::less<>> adjacency_;
    FactorId next_id_ = 0;
};

struct LinearDynamics {
    Eigen::MatrixXd F;  // n x n
    Eigen::MatrixXd G;  // n x m
    Eigen::VectorXd u;  // m
    Eigen::MatrixXd Q;  // n x n, SPD
};

struct LinearMeasurement {
    Eigen::MatrixXd H;  // rows = len(y), cols = total dim of the measured variables
    Eigen::MatrixXd R;  // SPD
    Eigen::VectorXd y;
};

struct PredictionFactors {
    FactorId old_state;
    FactorId new_state;
    FactorId transition;
};

/// Registers `x_new` and adds the three linear-Gaussian transition factors
/// linking it to `x_old`.
PredictionFactors predict(FactorGraph& g, std::string_view x_old, const std::string& x_new,
                          const LinearDynamics& dyn);

/// Sum every factor adjacent to `name`, replace them with the Schur marginal
/// over the Markov blanket, then drop the variable. Throws SingularBlock when
/// the summed self-information block cannot be inverted.
void rollup(FactorGraph& g, std::string_view name);

/// {H^T R^-1 y, H^T R^-1 H} over `vars`, whose order defines the columns of H.
CanonicalFactor measurement_factor(const Scope& vars, const LinearMeasurement& m);

FactorId measurement_update(FactorGraph& g, const NameList& vars, const LinearMeasurement& m);

}  // namespace fgddf
