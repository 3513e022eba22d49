/**
 * @file canonical.hpp
 * @brief Information-form (canonical) Gaussian factors over named variables.
 *
 * A CanonicalFactor carries an information vector zeta and information matrix
 * lambda over an ordered scope of variables. Scopes are always stored in
 * ascending name order so that any two factors over the same variables are
 * index-aligned. Lambda is symmetrized on construction and is allowed to be
 * indefinite: differences of factors and conditional-information factors are
 * legitimate values.
 */
#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

#include "fgddf/errors.hpp"

namespace fgddf {

/// Condition-number limit above which a block is treated as singular.
inline constexpr double kSingularConditionLimit = 1e12;

struct VariableId {
    std::string name;
    int dim = 1;

    friend bool operator==(const VariableId&, const VariableId&) = default;
};

using Scope = std::vector<VariableId>;
using NameList = std::vector<std::string>;

/// Sort by name and check that repeated names agree on dim; duplicates are collapsed.
Scope canonical_scope(Scope scope);

/// Union of two canonical scopes. Throws DimensionMismatch on a dim conflict.
Scope scope_union(const Scope& a, const Scope& b);

int scope_dim(const Scope& scope);

class CanonicalFactor {
public:
    CanonicalFactor() = default;

    /// The scope may be given in any order; zeta and lambda are permuted into
    /// canonical order alongside it.
    CanonicalFactor(Scope scope, Eigen::VectorXd zeta, Eigen::MatrixXd lambda);

    static CanonicalFactor zero(Scope scope);

    const Scope& scope() const { return scope_; }
    const Eigen::VectorXd& zeta() const { return zeta_; }
    const Eigen::MatrixXd& lambda() const { return lambda_; }
    int dim() const { return static_cast<int>(zeta_.size()); }
    bool empty() const { return scope_.empty(); }

    bool contains(std::string_view name) const;
    const VariableId* find(std::string_view name) const;

    /// Scalar offset of a variable inside zeta; -1 when absent.
    int offset(std::string_view name) const;

    /// Scalar indices of the named variables, in canonical order of the names.
    std::vector<int> indices(const NameList& names) const;

    NameList names() const;

    /// Zero-pad onto a superset scope (must contain every variable of this factor).
    CanonicalFactor expanded(const Scope& superset) const;

    bool is_zero(double tol = 0.0) const;

private:
    Scope scope_;
    Eigen::VectorXd zeta_;
    Eigen::MatrixXd lambda_;
};

struct MomentGaussian {
    Scope scope;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    /// Mean/covariance sub-block for one variable of the scope.
    MomentGaussian select(std::string_view name) const;
};

CanonicalFactor factor_add(const CanonicalFactor& a, const CanonicalFactor& b);
CanonicalFactor factor_subtract(const CanonicalFactor& a, const CanonicalFactor& b);

inline CanonicalFactor operator+(const CanonicalFactor& a, const CanonicalFactor& b) { return factor_add(a, b); }
inline CanonicalFactor operator-(const CanonicalFactor& a, const CanonicalFactor& b) { return factor_subtract(a, b); }

/// Schur-complement marginal onto `keep`. Throws SingularBlock if the removed
/// block is singular or ill-conditioned.
CanonicalFactor marginalize(const CanonicalFactor& joint, const NameList& keep);

MomentGaussian to_moment(const CanonicalFactor& f);
CanonicalFactor from_moment(const MomentGaussian& g);

/**
 * Reassemble a local joint over {x, s} after its x-marginal has been replaced by
 * a fused marginal: the local conditional information of s given x is kept and
 * the fused marginal is added on top of it.
 *
 * zeta  = [zeta_f; 0] + [L_xs L_ss^-1 zeta_s; zeta_s]
 * lambda = blkdiag(Lambda_f, 0) + [L_xs L_ss^-1 L_sx, L_xs; L_sx, L_ss]
 */
CanonicalFactor hscf_closed_form(const CanonicalFactor& local,
                                 const CanonicalFactor& fused_marginal,
                                 const NameList& x_vars);

/// Largest |a-b| over zeta and lambda divided by max(1, largest |a|,|b| entry).
/// Scopes must match.
double relative_difference(const CanonicalFactor& a, const CanonicalFactor& b);

/// Symmetric positive-definite test via Cholesky.
bool is_spd(const Eigen::MatrixXd& m);

/// Solve `block * X = rhs` for a symmetric block, rejecting blocks whose
/// reciprocal condition estimate is below 1/kSingularConditionLimit.
Eigen::MatrixXd solve_symmetric(const Eigen::MatrixXd& block, const Eigen::MatrixXd& rhs,
                                std::string_view what);

}  // namespace fgddf
