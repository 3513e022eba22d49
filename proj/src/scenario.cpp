#include "fgddf/scenario.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "fgddf/inference.hpp"

namespace fgddf {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

Eigen::VectorXd vec_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd mat_from_json(const json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = rows.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c)
            throw ConfigError("ragged matrix in scenario");
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    return m;
}

Eigen::MatrixXd diag2(double a, double b) { return Eigen::Vector2d(a, b).asDiagonal(); }

Eigen::MatrixXd rel_h() {
    Eigen::MatrixXd h(2, 4);
    h << Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity();
    return h;
}

SensorSpec relative_sensor(const std::string& target, const std::string& bias, Eigen::MatrixXd r) {
    return {"rel " + target, {target, bias}, rel_h(), std::move(r), std::nullopt, {}};
}

SensorSpec bias_sensor(const std::string& bias, Eigen::MatrixXd r) {
    return {"bias " + bias, {bias}, Eigen::Matrix2d::Identity(), std::move(r), std::nullopt, {}};
}

std::string landmark_name(int k) {
    std::ostringstream os;
    os << 'L' << std::setw(2) << std::setfill('0') << k;
    return os.str();
}

}  // namespace

FusionMode parse_mode(const std::string& s) {
    if (s == "heterogeneous") return FusionMode::Heterogeneous;
    if (s == "homogeneous") return FusionMode::Homogeneous;
    if (s == "centralized") return FusionMode::Centralized;
    throw ConfigError("unknown mode '" + s + "'");
}

std::string to_string(FusionMode m) {
    switch (m) {
        case FusionMode::Heterogeneous: return "heterogeneous";
        case FusionMode::Homogeneous: return "homogeneous";
        case FusionMode::Centralized: return "centralized";
    }
    return "unknown";
}

Eigen::Vector2d Trajectory::position(double t) const {
    const double a = 2.0 * std::numbers::pi * (t / period + phase);
    return center + Eigen::Vector2d(radius.x() * std::cos(a), radius.y() * std::sin(a));
}

const VariableSpec& ScenarioConfig::variable(const std::string& name) const {
    for (const auto& v : variables)
        if (v.name == name) return v;
    throw ConfigError("unknown variable '" + name + "'");
}

const AgentSpec& ScenarioConfig::agent(AgentId id) const {
    for (const auto& a : agents)
        if (a.id == id) return a;
    throw ConfigError("unknown agent " + std::to_string(id));
}

NetworkTopology ScenarioConfig::topology() const {
    NetworkTopology t;
    for (const auto& a : agents) t.agents.push_back(a.id);
    t.links = links;
    return t;
}

int ScenarioConfig::global_dim() const {
    int n = 0;
    for (const auto& v : variables) n += v.dim;
    return n;
}

NameList ScenarioConfig::agent_variables(AgentId id, FusionMode mode) const {
    NameList out;
    if (mode == FusionMode::Heterogeneous) {
        out = agent(id).variables;
    } else {
        for (const auto& v : variables) out.push_back(v.name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

NameList ScenarioConfig::common_variables(AgentId a, AgentId b, FusionMode mode) const {
    const NameList va = agent_variables(a, mode);
    const NameList vb = agent_variables(b, mode);
    NameList out;
    std::set_intersection(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(out));
    return out;
}

void validate(const ScenarioConfig& cfg) {
    if (cfg.kind != "tracking" && cfg.kind != "mapping" && cfg.kind != "custom")
        throw ConfigError("kind must be tracking, mapping or custom");
    if (cfg.steps < 0) throw ConfigError("steps must be >= 0");
    if (!(cfg.dt > 0)) throw ConfigError("dt must be positive");
    if (cfg.exchange_rounds < 1) throw ConfigError("exchange_rounds must be >= 1");
    if (cfg.mc.runs < 0) throw ConfigError("mc.runs must be >= 0");

    std::set<std::string> names;
    for (const auto& v : cfg.variables) {
        if (v.name.empty()) throw ConfigError("variable with empty name");
        if (!names.insert(v.name).second) throw ConfigError("duplicate variable '" + v.name + "'");
        if (v.dim < 1) throw ConfigError("variable '" + v.name + "' must have dim >= 1");
        if (v.prior_mean.size() != v.dim || v.prior_cov.rows() != v.dim || v.prior_cov.cols() != v.dim)
            throw ConfigError("prior of '" + v.name + "' does not match its dim");
        if (!is_spd(v.prior_cov)) throw ConfigError("prior covariance of '" + v.name + "' is not SPD");
    }

    std::set<AgentId> ids;
    for (const auto& a : cfg.agents) {
        if (!ids.insert(a.id).second) throw ConfigError("duplicate agent id " + std::to_string(a.id));
        std::set<std::string> own;
        for (const auto& name : a.variables) {
            if (!names.contains(name))
                throw ConfigError("agent " + std::to_string(a.id) + " references unknown variable '" + name + "'");
            if (!own.insert(name).second)
                throw ConfigError("agent " + std::to_string(a.id) + " lists '" + name + "' twice");
        }
        for (const auto& s : a.sensors) {
            int cols = 0;
            for (const auto& name : s.vars) {
                if (!own.contains(name))
                    throw ConfigError("sensor '" + s.label + "' of agent " + std::to_string(a.id) +
                                      " measures '" + name + "' outside the agent's variables");
                cols += cfg.variable(name).dim;
            }
            if (s.H.cols() != cols || s.H.rows() != s.R.rows() || s.R.rows() != s.R.cols() || s.H.rows() < 1)
                throw ConfigError("sensor '" + s.label + "' has inconsistent H/R shapes");
            if (!is_spd(s.R)) throw ConfigError("sensor '" + s.label + "' noise R is not SPD");
            if (s.range) {
                if (!(*s.range > 0)) throw ConfigError("sensor '" + s.label + "' range must be positive");
                if (!a.trajectory) throw ConfigError("range-gated sensor '" + s.label + "' needs an agent trajectory");
                if (!names.contains(s.range_target) || cfg.variable(s.range_target).dim < 2)
                    throw ConfigError("sensor '" + s.label + "' range target must be a variable of dim >= 2");
            }
        }
        if (a.trajectory && !(a.trajectory->period > 0))
            throw ConfigError("trajectory period of agent " + std::to_string(a.id) + " must be positive");
    }

    const NetworkTopology topo = cfg.topology();
    topo.validate();

    // Holders of each variable must form a connected subtree, otherwise the
    // channel filters cannot account for common information.
    for (const auto& v : cfg.variables) {
        std::set<AgentId> holders;
        for (const auto& a : cfg.agents)
            if (std::find(a.variables.begin(), a.variables.end(), v.name) != a.variables.end()) holders.insert(a.id);
        if (holders.size() < 2) continue;
        std::set<AgentId> reached{*holders.begin()};
        std::vector<AgentId> stack{*holders.begin()};
        while (!stack.empty()) {
            const AgentId u = stack.back();
            stack.pop_back();
            for (AgentId w : topo.neighbors(u))
                if (holders.contains(w) && reached.insert(w).second) stack.push_back(w);
        }
        if (reached != holders)
            throw TopologyError("agents holding '" + v.name + "' are not connected through agents that also hold it");
    }
}

json scenario_to_json(const ScenarioConfig& cfg) {
    json vars = json::array();
    for (const auto& v : cfg.variables)
        vars.push_back({{"name", v.name}, {"dim", v.dim}, {"prior_mean", vec_to_json(v.prior_mean)},
                        {"prior_cov", mat_to_json(v.prior_cov)}});
    json agents = json::array();
    for (const auto& a : cfg.agents) {
        json sensors = json::array();
        for (const auto& s : a.sensors) {
            json js = {{"label", s.label}, {"vars", s.vars}, {"H", mat_to_json(s.H)}, {"R", mat_to_json(s.R)}};
            if (s.range) {
                js["range"] = *s.range;
                js["range_target"] = s.range_target;
            }
            sensors.push_back(std::move(js));
        }
        json ja = {{"id", a.id}, {"variables", a.variables}, {"sensors", sensors}};
        if (a.trajectory)
            ja["trajectory"] = {{"center", vec_to_json(a.trajectory->center)},
                                {"radius", vec_to_json(a.trajectory->radius)},
                                {"period", a.trajectory->period},
                                {"phase", a.trajectory->phase}};
        agents.push_back(std::move(ja));
    }
    json links = json::array();
    for (auto [a, b] : cfg.links) links.push_back({a, b});
    return {{"kind", cfg.kind},
            {"steps", cfg.steps},
            {"dt", cfg.dt},
            {"exchange_rounds", cfg.exchange_rounds},
            {"mc", {{"runs", cfg.mc.runs}, {"seed", cfg.mc.seed}}},
            {"geometry", cfg.geometry},
            {"variables", vars},
            {"agents", agents},
            {"links", links}};
}

ScenarioConfig scenario_from_json(const json& j) {
    try {
        ScenarioConfig cfg;
        cfg.kind = j.value("kind", std::string("custom"));
        cfg.steps = j.at("steps").get<int>();
        cfg.dt = j.value("dt", 1.0);
        cfg.exchange_rounds = j.value("exchange_rounds", 1);
        if (j.contains("mc")) {
            cfg.mc.runs = j.at("mc").value("runs", 50);
            cfg.mc.seed = j.at("mc").value("seed", std::uint64_t{7});
        }
        cfg.geometry = j.value("geometry", json::object());
        for (const auto& v : j.at("variables")) {
            VariableSpec spec;
            spec.name = v.at("name").get<std::string>();
            spec.dim = v.at("dim").get<int>();
            spec.prior_mean = vec_from_json(v.at("prior_mean"));
            spec.prior_cov = mat_from_json(v.at("prior_cov"));
            cfg.variables.push_back(std::move(spec));
        }
        for (const auto& a : j.at("agents")) {
            AgentSpec spec;
            spec.id = a.at("id").get<AgentId>();
            spec.variables = a.at("variables").get<NameList>();
            if (a.contains("trajectory")) {
                const auto& t = a.at("trajectory");
                Trajectory tr;
                tr.center = vec_from_json(t.at("center"));
                tr.radius = vec_from_json(t.at("radius"));
                tr.period = t.at("period").get<double>();
                tr.phase = t.value("phase", 0.0);
                spec.trajectory = tr;
            }
            for (const auto& s : a.value("sensors", json::array())) {
                SensorSpec sensor;
                sensor.label = s.value("label", std::string("sensor"));
                sensor.vars = s.at("vars").get<NameList>();
                sensor.H = mat_from_json(s.at("H"));
                sensor.R = mat_from_json(s.at("R"));
                if (s.contains("range")) {
                    sensor.range = s.at("range").get<double>();
                    sensor.range_target = s.at("range_target").get<std::string>();
                }
                spec.sensors.push_back(std::move(sensor));
            }
            cfg.agents.push_back(std::move(spec));
        }
        for (const auto& l : j.at("links")) cfg.links.emplace_back(l.at(0).get<AgentId>(), l.at(1).get<AgentId>());
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("scenario file '" + path + "' is not valid JSON: " + e.what());
    }
    return scenario_from_json(j);
}

ScenarioConfig build_tracking_scenario() {
    ScenarioConfig cfg;
    cfg.kind = "tracking";
    cfg.steps = 50;
    cfg.dt = 1.0;
    cfg.mc = {50, 7};
    cfg.geometry = {{"targets", 6}, {"agents", 5}, {"topology", "chain 1-2-3-4-5"}};

    for (int t = 1; t <= 6; ++t)
        cfg.variables.push_back({"T" + std::to_string(t), 2, Eigen::Vector2d(20.0 * (t - 1), 50.0),
                                 diag2(100.0, 100.0)});
    for (int i = 1; i <= 5; ++i)
        cfg.variables.push_back({"s_" + std::to_string(i), 2, Eigen::Vector2d::Zero(), diag2(4.0, 4.0)});

    struct Row {
        std::vector<int> targets;
        Eigen::MatrixXd r1, r2;
    };
    const std::vector<Row> table = {
        {{1, 2}, diag2(1, 10), diag2(3, 3)},
        {{2, 3}, diag2(3, 3), diag2(3, 3)},
        {{3, 4, 5}, diag2(4, 4), diag2(2, 2)},
        {{4, 5}, diag2(10, 1), diag2(4, 4)},
        {{5, 6}, diag2(2, 2), diag2(5, 5)},
    };
    for (int i = 1; i <= 5; ++i) {
        const Row& row = table[static_cast<std::size_t>(i - 1)];
        AgentSpec a;
        a.id = i;
        const std::string bias = "s_" + std::to_string(i);
        for (std::size_t k = 0; k < row.targets.size(); ++k) {
            const std::string target = "T" + std::to_string(row.targets[k]);
            a.variables.push_back(target);
            // Sensor 1 observes the first listed target, sensor 2 the rest.
            a.sensors.push_back(relative_sensor(target, bias, k == 0 ? row.r1 : row.r2));
        }
        a.variables.push_back(bias);
        a.sensors.push_back(bias_sensor(bias, diag2(1, 1)));
        cfg.agents.push_back(std::move(a));
    }
    cfg.links = {{1, 2}, {2, 3}, {3, 4}, {4, 5}};
    return cfg;
}

ScenarioConfig build_mapping_scenario() {
    ScenarioConfig cfg;
    cfg.kind = "mapping";
    cfg.steps = 150;
    cfg.dt = 1.0;
    cfg.mc = {50, 7};
    const double field_w = 180.0, field_h = 160.0, sensing = 45.0;
    cfg.geometry = {{"field", {field_w, field_h}}, {"sensing_radius", sensing}, {"landmarks", 25}, {"agents", 4}};

    const std::vector<Eigen::Vector2d> centers = {{45, 120}, {135, 120}, {135, 40}, {45, 40}};

    // Landmark groups: each agent's private set and the sets shared along the chain 1-2-3-4.
    struct Group {
        std::vector<int> ids;
        std::vector<int> holders;
        Eigen::Vector2d center;
        Eigen::Vector2d spread;
    };
    const std::vector<Group> groups = {
        {{1, 2, 3, 4, 5}, {1}, centers[0], {30, 30}},
        {{12, 13, 14}, {1, 2}, {90, 120}, {10, 25}},
        {{6, 7, 8, 9}, {2}, centers[1], {30, 30}},
        {{10, 11}, {2, 3}, {135, 80}, {25, 10}},
        {{15, 16, 17, 18}, {3}, centers[2], {30, 30}},
        {{19, 20, 21}, {3, 4}, {90, 40}, {10, 25}},
        {{22, 23, 24, 25}, {4}, centers[3], {30, 30}},
    };

    // Nominal landmark layout is procedural with a fixed seed.
    std::mt19937_64 layout(2021);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::map<int, Eigen::Vector2d> pos;
    for (const auto& g : groups)
        for (int id : g.ids) {
            const double ux = unit(layout), uy = unit(layout);
            Eigen::Vector2d p = g.center + Eigen::Vector2d(g.spread.x() * ux, g.spread.y() * uy);
            p.x() = std::clamp(p.x(), 0.0, field_w);
            p.y() = std::clamp(p.y(), 0.0, field_h);
            pos[id] = p;
        }
    // Landmark 14: in agent 2's range for its first few steps only, then
    // unseen until agent 1 reaches it near step 27.
    pos[14] = Eigen::Vector2d(92.0, 150.0);

    for (int k = 1; k <= 25; ++k) cfg.variables.push_back({landmark_name(k), 2, pos[k], diag2(225.0, 225.0)});
    for (int i = 1; i <= 4; ++i)
        cfg.variables.push_back({"b_" + std::to_string(i), 2, Eigen::Vector2d::Zero(), diag2(25.0, 25.0)});

    const std::vector<double> phases = {0.5, 0.5, 0.0, 0.0};
    const std::vector<double> periods = {60.0, 60.0, 70.0, 80.0};
    for (int i = 1; i <= 4; ++i) {
        AgentSpec a;
        a.id = i;
        const auto idx = static_cast<std::size_t>(i - 1);
        a.trajectory = Trajectory{centers[idx], Eigen::Vector2d(30.0, 25.0), periods[idx], phases[idx]};
        const std::string bias = "b_" + std::to_string(i);
        std::vector<int> mine;
        for (const auto& g : groups)
            if (std::find(g.holders.begin(), g.holders.end(), i) != g.holders.end())
                mine.insert(mine.end(), g.ids.begin(), g.ids.end());
        std::sort(mine.begin(), mine.end());
        for (int id : mine) {
            const std::string name = landmark_name(id);
            a.variables.push_back(name);
            SensorSpec s = relative_sensor(name, bias, diag2(4.0, 4.0));
            s.range = sensing;
            s.range_target = name;
            a.sensors.push_back(std::move(s));
        }
        a.variables.push_back(bias);
        a.sensors.push_back(bias_sensor(bias, diag2(25.0, 25.0)));
        cfg.agents.push_back(std::move(a));
    }
    cfg.links = {{1, 2}, {2, 3}, {3, 4}};
    return cfg;
}

std::mt19937_64 run_rng(std::uint64_t seed, int run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run)};
    return std::mt19937_64(seq);
}

namespace {

Eigen::VectorXd draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = n01(rng);
    const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    return mean + l * z;
}

}  // namespace

Truth sample_truth(const ScenarioConfig& cfg, std::mt19937_64& rng) {
    Truth truth;
    for (const auto& v : cfg.variables) truth[v.name] = draw(v.prior_mean, v.prior_cov, rng);
    return truth;
}

ObservationSchedule generate_observations(const ScenarioConfig& cfg, const Truth& truth, std::mt19937_64& rng) {
    ObservationSchedule schedule(static_cast<std::size_t>(cfg.steps));
    for (int step = 1; step <= cfg.steps; ++step) {
        auto& per_agent = schedule[static_cast<std::size_t>(step - 1)];
        per_agent.resize(cfg.agents.size());
        const double t = (step - 1) * cfg.dt;
        for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
            const AgentSpec& a = cfg.agents[i];
            for (const auto& s : a.sensors) {
                if (s.range) {
                    const Eigen::Vector2d here = a.trajectory->position(t);
                    const Eigen::Vector2d there = truth.at(s.range_target).head<2>();
                    if ((there - here).norm() > *s.range) continue;
                }
                Eigen::VectorXd x(s.H.cols());
                int off = 0;
                for (const auto& name : s.vars) {
                    const auto& tv = truth.at(name);
                    x.segment(off, tv.size()) = tv;
                    off += static_cast<int>(tv.size());
                }
                const Eigen::VectorXd y = draw(s.H * x, s.R, rng);
                per_agent[i].push_back({s.vars, {s.H, s.R, y}});
            }
        }
    }
    return schedule;
}

std::vector<CanonicalFactor> prior_factors(const ScenarioConfig& cfg) {
    std::vector<CanonicalFactor> out;
    for (const auto& v : cfg.variables)
        out.push_back(from_moment({{{v.name, v.dim}}, v.prior_mean, v.prior_cov}));
    return out;
}

std::vector<AgentState> build_agents(const ScenarioConfig& cfg, FusionMode mode) {
    if (mode == FusionMode::Centralized) throw ConfigError("centralized mode has no agents");
    const auto priors = prior_factors(cfg);
    std::vector<AgentState> agents;
    const NetworkTopology topo = cfg.topology();
    for (const auto& spec : cfg.agents) {
        const NameList vars = cfg.agent_variables(spec.id, mode);
        Scope scope;
        std::vector<CanonicalFactor> own_priors;
        for (const auto& name : vars) scope.push_back({name, cfg.variable(name).dim});
        for (const auto& p : priors)
            if (std::binary_search(vars.begin(), vars.end(), p.scope().front().name)) own_priors.push_back(p);
        std::map<AgentId, NameList> common;
        for (AgentId peer : topo.neighbors(spec.id)) common[peer] = cfg.common_variables(spec.id, peer, mode);
        agents.push_back(make_agent(spec.id, scope, own_priors, common));
    }
    return agents;
}

RunTrace run_scenario(const ScenarioConfig& cfg, FusionMode mode, std::uint64_t seed, int run, ExecutionPolicy policy,
                      bool keep_messages) {
    if (mode == FusionMode::Centralized) return centralized_baseline(cfg, seed, run);
    auto rng = run_rng(seed, run);
    const Truth truth = sample_truth(cfg, rng);
    const ObservationSchedule schedule = generate_observations(cfg, truth, rng);

    std::vector<AgentState> agents = build_agents(cfg, mode);
    std::map<AgentId, std::size_t> index;
    for (std::size_t i = 0; i < cfg.agents.size(); ++i) index[cfg.agents[i].id] = i;

    NetworkOptions options;
    options.exchange_rounds = cfg.exchange_rounds;
    options.policy = policy;
    options.keep_messages = keep_messages;
    RunTrace trace = run_network(
        cfg.topology(), agents, cfg.steps,
        [&](AgentId id, int step) { return schedule[static_cast<std::size_t>(step - 1)][index.at(id)]; }, options);
    trace.truth = truth;
    return trace;
}

RunTrace centralized_baseline(const ScenarioConfig& cfg, std::uint64_t seed, int run) {
    auto rng = run_rng(seed, run);
    const Truth truth = sample_truth(cfg, rng);
    const ObservationSchedule schedule = generate_observations(cfg, truth, rng);

    FactorGraph g;
    for (const auto& v : cfg.variables) g.add_variable({v.name, v.dim});
    for (const auto& p : prior_factors(cfg)) g.add_factor(p);

    RunTrace trace;
    trace.truth = truth;
    for (int step = 1; step <= cfg.steps; ++step) {
        for (const auto& per_agent : schedule[static_cast<std::size_t>(step - 1)])
            for (const auto& obs : per_agent) measurement_update(g, obs.vars, obs.m);
        StepRecord rec;
        rec.step = step;
        rec.agents.push_back({0, joint_moment(g), 0});
        trace.steps.push_back(std::move(rec));
    }
    return trace;
}

}  // namespace fgddf
