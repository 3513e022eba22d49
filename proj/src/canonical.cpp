#include "fgddf/canonical.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fgddf {

namespace {

std::vector<int> complement_indices(int n, const std::vector<int>& taken) {
    std::vector<char> mark(static_cast<std::size_t>(n), 0);
    for (int i : taken) mark[static_cast<std::size_t>(i)] = 1;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n) - taken.size());
    for (int i = 0; i < n; ++i)
        if (!mark[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(idx[i]);
    return out;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
    return out;
}

// Scalar offsets of each variable of `sub` inside `super` (both canonical).
std::vector<int> embed_indices(const Scope& sub, const Scope& super) {
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(scope_dim(sub)));
    std::size_t j = 0;
    int off = 0;
    for (const auto& v : sub) {
        while (j < super.size() && super[j].name < v.name) off += super[j++].dim;
        if (j == super.size() || super[j].name != v.name)
            throw DimensionMismatch("variable '" + v.name + "' missing from target scope");
        if (super[j].dim != v.dim)
            throw DimensionMismatch("variable '" + v.name + "' has inconsistent dim");
        for (int k = 0; k < v.dim; ++k) idx.push_back(off + k);
    }
    return idx;
}

}  // namespace

Scope canonical_scope(Scope scope) {
    std::stable_sort(scope.begin(), scope.end(),
                     [](const VariableId& a, const VariableId& b) { return a.name < b.name; });
    Scope out;
    out.reserve(scope.size());
    for (auto& v : scope) {
        if (v.dim < 1) throw DimensionMismatch("variable '" + v.name + "' must have dim >= 1");
        if (!out.empty() && out.back().name == v.name) {
            if (out.back().dim != v.dim)
                throw DimensionMismatch("variable '" + v.name + "' has inconsistent dim");
            continue;
        }
        out.push_back(std::move(v));
    }
    return out;
}

Scope scope_union(const Scope& a, const Scope& b) {
    Scope all;
    all.reserve(a.size() + b.size());
    all.insert(all.end(), a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    return canonical_scope(std::move(all));
}

int scope_dim(const Scope& scope) {
    return std::accumulate(scope.begin(), scope.end(), 0,
                           [](int acc, const VariableId& v) { return acc + v.dim; });
}

CanonicalFactor::CanonicalFactor(Scope scope, Eigen::VectorXd zeta, Eigen::MatrixXd lambda) {
    const int n = scope_dim(scope);
    if (zeta.size() != n || lambda.rows() != n || lambda.cols() != n) {
        std::ostringstream os;
        os << "factor over " << n << " scalars got zeta " << zeta.size() << " and lambda " << lambda.rows()
           << "x" << lambda.cols();
        throw DimensionMismatch(os.str());
    }
    // Offsets of each variable in the caller's order.
    std::vector<int> offsets(scope.size());
    int off = 0;
    for (std::size_t i = 0; i < scope.size(); ++i) {
        offsets[i] = off;
        off += scope[i].dim;
    }
    std::vector<std::size_t> order(scope.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scope[a].name < scope[b].name; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (scope[order[i]].name == scope[order[i - 1]].name)
            throw DimensionMismatch("duplicate variable '" + scope[order[i]].name + "' in factor scope");

    bool sorted = std::is_sorted(order.begin(), order.end());
    if (sorted) {
        scope_ = std::move(scope);
        zeta_ = std::move(zeta);
        lambda_ = std::move(lambda);
    } else {
        std::vector<int> perm;
        perm.reserve(static_cast<std::size_t>(n));
        for (std::size_t k : order)
            for (int d = 0; d < scope[k].dim; ++d) perm.push_back(offsets[k] + d);
        zeta_ = gather(zeta, perm);
        lambda_ = gather(lambda, perm, perm);
        scope_.reserve(scope.size());
        for (std::size_t k : order) scope_.push_back(scope[k]);
    }
    for (const auto& v : scope_)
        if (v.dim < 1) throw DimensionMismatch("variable '" + v.name + "' must have dim >= 1");
    lambda_ = (0.5 * (lambda_ + lambda_.transpose())).eval();
}

CanonicalFactor CanonicalFactor::zero(Scope scope) {
    scope = canonical_scope(std::move(scope));
    const int n = scope_dim(scope);
    return CanonicalFactor(std::move(scope), Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n));
}

bool CanonicalFactor::contains(std::string_view name) const { return find(name) != nullptr; }

const VariableId* CanonicalFactor::find(std::string_view name) const {
    auto it = std::lower_bound(scope_.begin(), scope_.end(), name,
                               [](const VariableId& v, std::string_view n) { return v.name < n; });
    if (it == scope_.end() || it->name != name) return nullptr;
    return &*it;
}

int CanonicalFactor::offset(std::string_view name) const {
    int off = 0;
    for (const auto& v : scope_) {
        if (v.name == name) return off;
        off += v.dim;
    }
    return -1;
}

std::vector<int> CanonicalFactor::indices(const NameList& names) const {
    NameList sorted = names;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<int> idx;
    for (const auto& name : sorted) {
        const int off = offset(name);
        if (off < 0) throw DimensionMismatch("variable '" + name + "' not in factor scope");
        const int d = find(name)->dim;
        for (int k = 0; k < d; ++k) idx.push_back(off + k);
    }
    return idx;
}

NameList CanonicalFactor::names() const {
    NameList out;
    out.reserve(scope_.size());
    for (const auto& v : scope_) out.push_back(v.name);
    return out;
}

CanonicalFactor CanonicalFactor::expanded(const Scope& superset) const {
    if (superset == scope_) return *this;
    const auto idx = embed_indices(scope_, superset);
    const int n = scope_dim(superset);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        z(idx[r]) = zeta_(static_cast<Eigen::Index>(r));
        for (std::size_t c = 0; c < idx.size(); ++c)
            l(idx[r], idx[c]) = lambda_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    return CanonicalFactor(superset, std::move(z), std::move(l));
}

bool CanonicalFactor::is_zero(double tol) const {
    if (zeta_.size() == 0) return true;
    return zeta_.cwiseAbs().maxCoeff() <= tol && lambda_.cwiseAbs().maxCoeff() <= tol;
}

MomentGaussian MomentGaussian::select(std::string_view name) const {
    int off = 0;
    for (const auto& v : scope) {
        if (v.name == name)
            return {{v}, mean.segment(off, v.dim), covariance.block(off, off, v.dim, v.dim)};
        off += v.dim;
    }
    throw DimensionMismatch("variable '" + std::string(name) + "' not in moment scope");
}

CanonicalFactor factor_add(const CanonicalFactor& a, const CanonicalFactor& b) {
    if (a.scope() == b.scope())
        return CanonicalFactor(a.scope(), a.zeta() + b.zeta(), a.lambda() + b.lambda());
    const Scope u = scope_union(a.scope(), b.scope());
    CanonicalFactor ea = a.expanded(u);
    const CanonicalFactor eb = b.expanded(u);
    return CanonicalFactor(u, ea.zeta() + eb.zeta(), ea.lambda() + eb.lambda());
}

CanonicalFactor factor_subtract(const CanonicalFactor& a, const CanonicalFactor& b) {
    if (a.scope() == b.scope())
        return CanonicalFactor(a.scope(), a.zeta() - b.zeta(), a.lambda() - b.lambda());
    const Scope u = scope_union(a.scope(), b.scope());
    const CanonicalFactor ea = a.expanded(u);
    const CanonicalFactor eb = b.expanded(u);
    return CanonicalFactor(u, ea.zeta() - eb.zeta(), ea.lambda() - eb.lambda());
}

bool is_spd(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) return false;
    if (m.size() == 0) return true;
    if (!m.allFinite()) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
    return llt.info() == Eigen::Success;
}

Eigen::MatrixXd solve_symmetric(const Eigen::MatrixXd& block, const Eigen::MatrixXd& rhs, std::string_view what) {
    if (block.size() == 0) return Eigen::MatrixXd(0, rhs.cols());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() >= 1.0 / kSingularConditionLimit))
        throw SingularBlock(std::string(what) + ": block is singular or ill-conditioned (rcond " +
                            std::to_string(ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0) + ")");
    return ldlt.solve(rhs);
}

CanonicalFactor marginalize(const CanonicalFactor& joint, const NameList& keep) {
    for (const auto& name : keep)
        if (!joint.contains(name)) throw DimensionMismatch("keep variable '" + name + "' not in joint scope");
    const auto keep_idx = joint.indices(keep);
    if (static_cast<int>(keep_idx.size()) == joint.dim()) return joint;
    const auto rm_idx = complement_indices(joint.dim(), keep_idx);

    Scope keep_scope;
    for (const auto& v : joint.scope())
        if (std::find(keep.begin(), keep.end(), v.name) != keep.end()) keep_scope.push_back(v);

    const Eigen::MatrixXd l_kk = gather(joint.lambda(), keep_idx, keep_idx);
    const Eigen::MatrixXd l_kr = gather(joint.lambda(), keep_idx, rm_idx);
    const Eigen::MatrixXd l_rr = gather(joint.lambda(), rm_idx, rm_idx);
    const Eigen::VectorXd z_k = gather(joint.zeta(), keep_idx);
    const Eigen::VectorXd z_r = gather(joint.zeta(), rm_idx);

    Eigen::MatrixXd rhs(l_rr.rows(), l_kr.rows() + 1);
    rhs << l_kr.transpose(), z_r;
    const Eigen::MatrixXd sol = solve_symmetric(l_rr, rhs, "marginalize");
    const Eigen::MatrixXd l_rr_inv_l_rk = sol.leftCols(l_kr.rows());
    const Eigen::VectorXd l_rr_inv_z_r = sol.col(l_kr.rows());

    return CanonicalFactor(std::move(keep_scope), z_k - l_kr * l_rr_inv_z_r, l_kk - l_kr * l_rr_inv_l_rk);
}

MomentGaussian to_moment(const CanonicalFactor& f) {
    if (f.dim() == 0) return {f.scope(), Eigen::VectorXd(0), Eigen::MatrixXd(0, 0)};
    Eigen::LLT<Eigen::MatrixXd> llt(f.lambda());
    if (llt.info() != Eigen::Success)
        throw NotADistribution("information matrix is not positive definite");
    const Eigen::Index n = f.dim();
    Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(n, n));
    cov = (0.5 * (cov + cov.transpose())).eval();
    Eigen::VectorXd mean = llt.solve(f.zeta());
    return {f.scope(), std::move(mean), std::move(cov)};
}

CanonicalFactor from_moment(const MomentGaussian& g) {
    const int n = scope_dim(g.scope);
    if (g.mean.size() != n || g.covariance.rows() != n || g.covariance.cols() != n)
        throw DimensionMismatch("moment gaussian shape does not match scope");
    if (n == 0) return CanonicalFactor(g.scope, Eigen::VectorXd(0), Eigen::MatrixXd(0, 0));
    const Eigen::MatrixXd sym = 0.5 * (g.covariance + g.covariance.transpose());
    // Reject clearly negative spectra before the Cholesky check.
    if (sym.diagonal().minCoeff() < -1e-10 * std::abs(sym.trace()))
        throw NotADistribution("covariance has negative variance");
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() != Eigen::Success) throw NotADistribution("covariance is not positive definite");
    Eigen::MatrixXd info = llt.solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::VectorXd zeta = info * g.mean;
    return CanonicalFactor(g.scope, std::move(zeta), std::move(info));
}

CanonicalFactor hscf_closed_form(const CanonicalFactor& local, const CanonicalFactor& fused_marginal,
                                 const NameList& x_vars) {
    for (const auto& name : x_vars)
        if (!local.contains(name)) throw DimensionMismatch("x variable '" + name + "' not in local scope");
    const auto x_idx = local.indices(x_vars);
    const auto s_idx = complement_indices(local.dim(), x_idx);

    Scope x_scope;
    for (const auto& v : local.scope())
        if (std::find(x_vars.begin(), x_vars.end(), v.name) != x_vars.end()) x_scope.push_back(v);
    if (fused_marginal.scope() != x_scope)
        throw DimensionMismatch("fused marginal scope must equal the x variables of the local factor");

    const Eigen::MatrixXd l_xs = gather(local.lambda(), x_idx, s_idx);
    const Eigen::MatrixXd l_ss = gather(local.lambda(), s_idx, s_idx);
    const Eigen::VectorXd z_s = gather(local.zeta(), s_idx);

    Eigen::MatrixXd rhs(l_ss.rows(), l_xs.rows() + 1);
    rhs << l_xs.transpose(), z_s;
    const Eigen::MatrixXd sol = solve_symmetric(l_ss, rhs, "hscf_closed_form");

    Eigen::VectorXd zeta = Eigen::VectorXd::Zero(local.dim());
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(local.dim(), local.dim());
    const Eigen::VectorXd z_x = fused_marginal.zeta() + l_xs * sol.col(l_xs.rows());
    const Eigen::MatrixXd l_xx = fused_marginal.lambda() + l_xs * sol.leftCols(l_xs.rows());
    for (std::size_t r = 0; r < x_idx.size(); ++r) {
        const auto rr = static_cast<Eigen::Index>(r);
        zeta(x_idx[r]) = z_x(rr);
        for (std::size_t c = 0; c < x_idx.size(); ++c) lambda(x_idx[r], x_idx[c]) = l_xx(rr, static_cast<Eigen::Index>(c));
        for (std::size_t c = 0; c < s_idx.size(); ++c) {
            lambda(x_idx[r], s_idx[c]) = l_xs(rr, static_cast<Eigen::Index>(c));
            lambda(s_idx[c], x_idx[r]) = l_xs(rr, static_cast<Eigen::Index>(c));
        }
    }
    for (std::size_t r = 0; r < s_idx.size(); ++r) {
        const auto rr = static_cast<Eigen::Index>(r);
        zeta(s_idx[r]) = z_s(rr);
        for (std::size_t c = 0; c < s_idx.size(); ++c) lambda(s_idx[r], s_idx[c]) = l_ss(rr, static_cast<Eigen::Index>(c));
    }
    return CanonicalFactor(local.scope(), std::move(zeta), std::move(lambda));
}

double relative_difference(const CanonicalFactor& a, const CanonicalFactor& b) {
    if (a.scope() != b.scope()) throw DimensionMismatch("relative_difference needs identical scopes");
    if (a.dim() == 0) return 0.0;
    const double diff = std::max((a.zeta() - b.zeta()).cwiseAbs().maxCoeff(),
                                 (a.lambda() - b.lambda()).cwiseAbs().maxCoeff());
    const double scale = std::max({1.0, a.zeta().cwiseAbs().maxCoeff(), b.zeta().cwiseAbs().maxCoeff(),
                                   a.lambda().cwiseAbs().maxCoeff(), b.lambda().cwiseAbs().maxCoeff()});
    return diff / scale;
}

}  // namespace fgddf
