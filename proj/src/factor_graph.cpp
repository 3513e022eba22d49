#include "fgddf/factor_graph.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <unordered_map>

namespace fgddf {

void FactorGraph::add_variable(VariableId v) {
    if (v.dim < 1) throw GraphError("variable '" + v.name + "' must have dim >= 1");
    if (vars_.contains(v.name)) throw GraphError("duplicate variable '" + v.name + "'");
    adjacency_[v.name];
    vars_.emplace(v.name, std::move(v));
}

bool FactorGraph::has_variable(std::string_view name) const { return vars_.find(name) != vars_.end(); }

const VariableId& FactorGraph::variable(std::string_view name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw GraphError("unknown variable '" + std::string(name) + "'");
    return it->second;
}

Scope FactorGraph::variables() const {
    Scope out;
    out.reserve(vars_.size());
    for (const auto& [_, v] : vars_) out.push_back(v);
    return out;
}

NameList FactorGraph::variable_names() const {
    NameList out;
    out.reserve(vars_.size());
    for (const auto& [name, _] : vars_) out.push_back(name);
    return out;
}

void FactorGraph::remove_variable(std::string_view name) {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw GraphError("unknown variable '" + std::string(name) + "'");
    auto adj = adjacency_.find(name);
    if (adj != adjacency_.end() && !adj->second.empty())
        throw GraphError("variable '" + std::string(name) + "' still has incident factors");
    if (adj != adjacency_.end()) adjacency_.erase(adj);
    vars_.erase(it);
}

FactorId FactorGraph::add_factor(CanonicalFactor f) {
    for (const auto& v : f.scope()) {
        auto it = vars_.find(v.name);
        if (it == vars_.end()) throw GraphError("factor scope references unregistered variable '" + v.name + "'");
        if (it->second.dim != v.dim) throw DimensionMismatch("factor disagrees on dim of '" + v.name + "'");
    }
    const FactorId id = next_id_++;
    for (const auto& v : f.scope()) adjacency_.find(v.name)->second.insert(id);
    factors_.emplace(id, std::move(f));
    return id;
}

void FactorGraph::remove_factor(FactorId id) {
    auto it = factors_.find(id);
    if (it == factors_.end()) throw GraphError("unknown factor id " + std::to_string(id));
    for (const auto& v : it->second.scope()) adjacency_.find(v.name)->second.erase(id);
    factors_.erase(it);
}

const CanonicalFactor& FactorGraph::factor(FactorId id) const {
    auto it = factors_.find(id);
    if (it == factors_.end()) throw GraphError("unknown factor id " + std::to_string(id));
    return it->second;
}

std::vector<FactorId> FactorGraph::adjacent_factors(std::string_view name) const {
    auto it = adjacency_.find(name);
    if (it == adjacency_.end()) throw GraphError("unknown variable '" + std::string(name) + "'");
    return {it->second.begin(), it->second.end()};
}

NameList FactorGraph::markov_blanket(std::string_view name) const {
    std::set<std::string> blanket;
    for (FactorId id : adjacent_factors(name))
        for (const auto& v : factors_.at(id).scope())
            if (v.name != name) blanket.insert(v.name);
    return {blanket.begin(), blanket.end()};
}

CanonicalFactor FactorGraph::joint() const {
    Scope scope = variables();
    std::unordered_map<std::string_view, int> offset;
    int n = 0;
    for (const auto& v : scope) {
        offset.emplace(v.name, n);
        n += v.dim;
    }
    Eigen::VectorXd zeta = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [_, f] : factors_) {
        int fr = 0;
        for (const auto& vr : f.scope()) {
            const int gr = offset.at(vr.name);
            zeta.segment(gr, vr.dim) += f.zeta().segment(fr, vr.dim);
            int fc = 0;
            for (const auto& vc : f.scope()) {
                lambda.block(gr, offset.at(vc.name), vr.dim, vc.dim) += f.lambda().block(fr, fc, vr.dim, vc.dim);
                fc += vc.dim;
            }
            fr += vr.dim;
        }
    }
    return CanonicalFactor(std::move(scope), std::move(zeta), std::move(lambda));
}

PredictionFactors predict(FactorGraph& g, std::string_view x_old, const std::string& x_new, const LinearDynamics& dyn) {
    const VariableId old_var = g.variable(x_old);
    const Eigen::Index n = old_var.dim;
    if (dyn.F.rows() != n || dyn.F.cols() != n || dyn.Q.rows() != n || dyn.Q.cols() != n)
        throw DimensionMismatch("dynamics F/Q do not match dim of '" + old_var.name + "'");
    if (dyn.G.rows() != n || dyn.G.cols() != dyn.u.size())
        throw DimensionMismatch("dynamics G/u shapes are inconsistent");
    if (g.has_variable(x_new)) throw GraphError("prediction target '" + x_new + "' already exists");
    if (!is_spd(dyn.Q)) throw NotADistribution("process noise Q is not positive definite");

    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (dyn.Q + dyn.Q.transpose()));
    const Eigen::MatrixXd q_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::VectorXd q_inv_gu = q_inv * (dyn.G * dyn.u);
    const Eigen::MatrixXd q_inv_f = q_inv * dyn.F;

    const VariableId new_var{x_new, static_cast<int>(n)};
    g.add_variable(new_var);

    PredictionFactors ids{};
    ids.old_state = g.add_factor(CanonicalFactor({old_var}, -dyn.F.transpose() * q_inv_gu, dyn.F.transpose() * q_inv_f));
    ids.new_state = g.add_factor(CanonicalFactor({new_var}, q_inv_gu, q_inv));

    // Scope order here is (new, old); the constructor re-sorts it.
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    cross.topRightCorner(n, n) = -q_inv_f;
    cross.bottomLeftCorner(n, n) = -q_inv_f.transpose();
    ids.transition = g.add_factor(CanonicalFactor({new_var, old_var}, Eigen::VectorXd::Zero(2 * n), std::move(cross)));
    return ids;
}

void rollup(FactorGraph& g, std::string_view name) {
    const VariableId v = g.variable(name);
    const auto adjacent = g.adjacent_factors(name);
    CanonicalFactor sum = CanonicalFactor::zero({v});
    for (FactorId id : adjacent) sum = factor_add(sum, g.factor(id));

    const NameList blanket = g.markov_blanket(name);
    CanonicalFactor marginal = marginalize(sum, blanket);

    for (FactorId id : adjacent) g.remove_factor(id);
    g.remove_variable(name);
    if (!marginal.empty()) g.add_factor(std::move(marginal));
}

CanonicalFactor measurement_factor(const Scope& vars, const LinearMeasurement& m) {
    const int n = scope_dim(vars);
    const auto rows = m.y.size();
    if (m.H.cols() != n || m.H.rows() != rows || m.R.rows() != rows || m.R.cols() != rows)
        throw DimensionMismatch("measurement H/R/y shapes do not match the measured scope");
    if (!is_spd(m.R)) throw NotADistribution("measurement noise R is not positive definite");
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m.R + m.R.transpose()));
    const Eigen::MatrixXd r_inv_h = llt.solve(m.H);
    const Eigen::VectorXd r_inv_y = llt.solve(m.y);
    return CanonicalFactor(vars, m.H.transpose() * r_inv_y, m.H.transpose() * r_inv_h);
}

FactorId measurement_update(FactorGraph& g, const NameList& vars, const LinearMeasurement& m) {
    Scope scope;
    scope.reserve(vars.size());
    for (const auto& name : vars) scope.push_back(g.variable(name));
    return g.add_factor(measurement_factor(scope, m));
}

}  // namespace fgddf
