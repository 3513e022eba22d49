#include "fgddf/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <sstream>

namespace fgddf {

namespace {

double cube(double x) { return x * x * x; }

std::size_t full_message_scalars(int n) {
    const auto m = static_cast<std::size_t>(n);
    return m + m * (m + 1) / 2;
}

struct RunAccumulator {
    std::vector<std::map<std::string, std::vector<double>>> sq_err;
    std::vector<std::vector<double>> nees;
    std::vector<int> nees_dim;
    std::size_t covered = 0;
    std::size_t total = 0;
    CostLedger costs;
    double min_eig = std::numeric_limits<double>::infinity();
};

RunAccumulator evaluate_run(const ScenarioConfig& cfg, const MonteCarloOptions& options, int run) {
    const RunTrace trace = run_scenario(cfg, options.mode, options.seed, run);
    std::optional<RunTrace> central;
    if (options.check_conservative && options.mode != FusionMode::Centralized)
        central = centralized_baseline(cfg, options.seed, run);

    RunAccumulator acc;
    const std::size_t n_agents = trace.steps.empty() ? 0 : trace.steps.front().agents.size();
    acc.sq_err.resize(n_agents);
    acc.nees.resize(n_agents);
    acc.nees_dim.assign(n_agents, 0);
    for (const auto& rec : trace.steps) {
        for (std::size_t i = 0; i < rec.agents.size(); ++i) {
            const MomentGaussian& post = rec.agents[i].posterior;
            acc.nees[i].push_back(nees(post, trace.truth));
            acc.nees_dim[i] = static_cast<int>(post.mean.size());
            for (const auto& v : post.scope) {
                const MomentGaussian m = post.select(v.name);
                const Eigen::VectorXd err = m.mean - trace.truth.at(v.name);
                acc.sq_err[i][v.name].push_back(err.squaredNorm());
                for (Eigen::Index k = 0; k < err.size(); ++k) {
                    ++acc.total;
                    if (std::abs(err(k)) <= 2.0 * std::sqrt(m.covariance(k, k))) ++acc.covered;
                }
            }
            if (central) {
                const MomentGaussian& c = central->steps[static_cast<std::size_t>(rec.step - 1)].agents.front().posterior;
                std::vector<int> idx;
                int off = 0;
                for (const auto& cv : c.scope) {
                    if (std::any_of(post.scope.begin(), post.scope.end(),
                                    [&](const VariableId& pv) { return pv.name == cv.name; }))
                        for (int d = 0; d < cv.dim; ++d) idx.push_back(off + d);
                    off += cv.dim;
                }
                Eigen::MatrixXd pc(idx.size(), idx.size());
                for (std::size_t r = 0; r < idx.size(); ++r)
                    for (std::size_t s = 0; s < idx.size(); ++s) pc(r, s) = c.covariance(idx[r], idx[s]);
                const Eigen::MatrixXd diff = post.covariance - pc;
                const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (diff + diff.transpose()),
                                                                       Eigen::EigenvaluesOnly);
                acc.min_eig = std::min(acc.min_eig, es.eigenvalues().minCoeff());
            }
        }
    }
    if (options.mode != FusionMode::Centralized) acc.costs = compute_costs(cfg, trace, options.mode);
    return acc;
}

}  // namespace

double CostLedger::comm_ratio() const {
    std::size_t het = 0, hom = 0;
    for (auto c : comm_scalars) het += c;
    for (auto c : comm_scalars_homogeneous) hom += c;
    return hom == 0 ? 0.0 : static_cast<double>(het) / static_cast<double>(hom);
}

double CostLedger::comp_ratio() const {
    if (global_dim == 0 || comp_state_dim.empty()) return 0.0;
    return cube(*std::max_element(comp_state_dim.begin(), comp_state_dim.end())) / cube(global_dim);
}

double CostLedger::comp_dim_ratio() const {
    if (global_dim == 0 || comp_state_dim.empty()) return 0.0;
    return static_cast<double>(*std::max_element(comp_state_dim.begin(), comp_state_dim.end())) / global_dim;
}

CostLedger compute_costs(const ScenarioConfig& cfg, const RunTrace& trace, FusionMode mode) {
    CostLedger c;
    c.global_dim = cfg.global_dim();
    const NetworkTopology topo = cfg.topology();
    const std::size_t steps = trace.steps.size();
    for (const auto& a : cfg.agents) {
        int dim = 0;
        for (const auto& name : cfg.agent_variables(a.id, mode)) dim += cfg.variable(name).dim;
        c.comp_state_dim.push_back(dim);
        c.comm_scalars_homogeneous.push_back(topo.neighbors(a.id).size() * steps * full_message_scalars(c.global_dim));
        for (AgentId peer : topo.neighbors(a.id)) {
            int common = 0;
            for (const auto& name : cfg.common_variables(a.id, peer, mode))
                common += cfg.variable(name).dim;
            c.max_common_dim = std::max(c.max_common_dim, common);
        }
    }
    c.comm_scalars.assign(cfg.agents.size(), 0);
    for (const auto& rec : trace.steps)
        for (std::size_t i = 0; i < rec.agents.size() && i < c.comm_scalars.size(); ++i)
            c.comm_scalars[i] += rec.agents[i].msg_scalars_sent;
    return c;
}

double RunMetrics::mean_rmse(AgentId agent, const std::string& var) const {
    for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i] == agent) {
            const auto& series = rmse[i].at(var);
            if (series.empty()) return 0.0;
            double s = 0.0;
            for (double x : series) s += x;
            return s / static_cast<double>(series.size());
        }
    throw ConfigError("no metrics for agent " + std::to_string(agent));
}

RunMetrics run_monte_carlo(const ScenarioConfig& cfg, const MonteCarloOptions& options) {
    validate(cfg);
    RunMetrics m;
    if (options.runs <= 0) return m;

    const auto runs = static_cast<std::size_t>(options.runs);
    std::vector<RunAccumulator> results(runs);
    std::vector<std::exception_ptr> errors(runs);
    const long count = options.runs;
    if (options.policy == ExecutionPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long r = 0; r < count; ++r) {
            try {
                results[static_cast<std::size_t>(r)] = evaluate_run(cfg, options, static_cast<int>(r));
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        }
    } else {
        for (long r = 0; r < count; ++r) {
            try {
                results[static_cast<std::size_t>(r)] = evaluate_run(cfg, options, static_cast<int>(r));
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    // Aggregate in run order so the result does not depend on scheduling.
    m.runs = options.runs;
    if (options.mode == FusionMode::Centralized) {
        m.agents = {0};
    } else {
        for (const auto& a : cfg.agents) m.agents.push_back(a.id);
    }
    const RunAccumulator& first = results.front();
    m.rmse.resize(first.sq_err.size());
    m.nees.resize(first.nees.size());
    m.nees_dim = first.nees_dim;
    std::size_t covered = 0, total = 0;
    double min_eig = std::numeric_limits<double>::infinity();
    for (const auto& r : results) {
        for (std::size_t i = 0; i < r.sq_err.size(); ++i) {
            for (const auto& [name, series] : r.sq_err[i]) {
                auto& dst = m.rmse[i][name];
                dst.resize(series.size(), 0.0);
                for (std::size_t k = 0; k < series.size(); ++k) dst[k] += series[k];
            }
            m.nees[i].resize(r.nees[i].size(), 0.0);
            for (std::size_t k = 0; k < r.nees[i].size(); ++k) m.nees[i][k] += r.nees[i][k];
        }
        covered += r.covered;
        total += r.total;
        min_eig = std::min(min_eig, r.min_eig);
    }
    const double nr = static_cast<double>(runs);
    for (auto& per_agent : m.rmse)
        for (auto& [_, series] : per_agent)
            for (double& x : series) x = std::sqrt(x / nr);
    for (auto& series : m.nees)
        for (double& x : series) x /= nr;
    m.coverage = total == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(total);
    m.costs = first.costs;
    if (options.check_conservative && options.mode != FusionMode::Centralized) m.min_conservative_eig = min_eig;
    return m;
}

std::pair<double, double> nees_interval(int dim, int runs, double confidence) {
    if (dim <= 0 || runs <= 0) throw ConfigError("nees_interval needs positive dim and runs");
    const boost::math::chi_squared dist(static_cast<double>(dim) * runs);
    const double tail = 0.5 * (1.0 - confidence);
    return {boost::math::quantile(dist, tail) / runs, boost::math::quantile(dist, 1.0 - tail) / runs};
}

std::string metrics_to_csv(const RunMetrics& m) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "agent,variable,step,rmse,nees\n";
    for (std::size_t i = 0; i < m.rmse.size(); ++i)
        for (const auto& [name, series] : m.rmse[i])
            for (std::size_t k = 0; k < series.size(); ++k)
                os << m.agents[i] << ',' << name << ',' << (k + 1) << ',' << series[k] << ',' << m.nees[i][k] << '\n';
    return os.str();
}

nlohmann::json costs_to_json(const CostLedger& c) {
    std::size_t het = 0, hom = 0;
    for (auto x : c.comm_scalars) het += x;
    for (auto x : c.comm_scalars_homogeneous) hom += x;
    return {{"comm_ratio", c.comm_ratio()},
            {"comp_ratio", c.comp_ratio()},
            {"comp_dim_ratio", c.comp_dim_ratio()},
            {"comm_scalars", c.comm_scalars},
            {"comm_scalars_total", het},
            {"comm_scalars_homogeneous", c.comm_scalars_homogeneous},
            {"comm_scalars_homogeneous_total", hom},
            {"comp_state_dim", c.comp_state_dim},
            {"global_dim", c.global_dim},
            {"max_common_dim", c.max_common_dim}};
}

nlohmann::json summary_json(const ScenarioConfig& cfg, const MonteCarloOptions& options, const RunMetrics& m) {
    nlohmann::json j = {{"kind", cfg.kind},
                        {"mode", to_string(options.mode)},
                        {"runs", m.runs},
                        {"seed", options.seed},
                        {"steps", cfg.steps}};
    if (m.empty()) {
        j["rmse"] = nullptr;
        j["nees"] = nullptr;
        j["coverage"] = nullptr;
        j["comm_ratio"] = nullptr;
        j["comp_ratio"] = nullptr;
        return j;
    }
    double rmse_sum = 0.0, nees_sum = 0.0;
    std::size_t rmse_n = 0, nees_n = 0;
    nlohmann::json per_agent = nlohmann::json::array();
    for (std::size_t i = 0; i < m.agents.size(); ++i) {
        nlohmann::json vars = nlohmann::json::object();
        for (const auto& [name, series] : m.rmse[i]) {
            const double mr = m.mean_rmse(m.agents[i], name);
            vars[name] = mr;
            rmse_sum += mr;
            ++rmse_n;
        }
        double ns = 0.0;
        for (double x : m.nees[i]) ns += x;
        const double mean_nees = m.nees[i].empty() ? 0.0 : ns / static_cast<double>(m.nees[i].size());
        nees_sum += mean_nees;
        ++nees_n;
        per_agent.push_back({{"agent", m.agents[i]}, {"rmse", vars}, {"nees", mean_nees}, {"state_dim", m.nees_dim[i]}});
    }
    j["rmse"] = rmse_n ? rmse_sum / static_cast<double>(rmse_n) : 0.0;
    j["nees"] = nees_n ? nees_sum / static_cast<double>(nees_n) : 0.0;
    j["coverage"] = m.coverage;
    j["agents"] = per_agent;
    if (options.mode == FusionMode::Centralized) {
        j["comm_ratio"] = nullptr;
        j["comp_ratio"] = nullptr;
    } else {
        j["comm_ratio"] = m.costs.comm_ratio();
        j["comp_ratio"] = m.costs.comp_ratio();
        j["costs"] = costs_to_json(m.costs);
    }
    if (m.min_conservative_eig) j["min_conservative_eig"] = *m.min_conservative_eig;
    return j;
}

}  // namespace fgddf
