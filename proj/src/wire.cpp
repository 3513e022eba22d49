#include "fgddf/wire.hpp"

namespace fgddf::wire {

namespace {

template <typename F>
auto parse_guard(const char* what, F&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

json scope_to_json(const Scope& scope) {
    json arr = json::array();
    for (const auto& v : scope) arr.push_back({{"name", v.name}, {"dim", v.dim}});
    return arr;
}

Scope scope_from_json(const json& j) {
    Scope scope;
    for (const auto& v : j) scope.push_back({v.at("name").get<std::string>(), v.at("dim").get<int>()});
    return scope;
}

json factor_to_json(const CanonicalFactor& f) {
    const auto n = f.dim();
    std::vector<double> zeta(f.zeta().data(), f.zeta().data() + n);
    std::vector<double> upper;
    upper.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
    for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c) upper.push_back(f.lambda()(r, c));
    return {{"scope", scope_to_json(f.scope())}, {"zeta", zeta}, {"lambda_upper", upper}};
}

CanonicalFactor factor_from_json(const json& j) {
    return parse_guard("factor", [&] {
        Scope scope = scope_from_json(j.at("scope"));
        const auto zeta = j.at("zeta").get<std::vector<double>>();
        const auto upper = j.at("lambda_upper").get<std::vector<double>>();
        const int n = scope_dim(scope);
        if (static_cast<int>(zeta.size()) != n || static_cast<int>(upper.size()) != n * (n + 1) / 2)
            throw ProtocolError("factor payload does not match its scope dimension");
        Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(zeta.data(), n);
        Eigen::MatrixXd l(n, n);
        std::size_t k = 0;
        for (int r = 0; r < n; ++r)
            for (int c = r; c < n; ++c) {
                l(r, c) = upper[k];
                l(c, r) = upper[k];
                ++k;
            }
        return CanonicalFactor(std::move(scope), std::move(z), std::move(l));
    });
}

json message_to_json(const FusionMessage& msg) {
    json factors = json::array();
    for (const auto& f : msg.factors) factors.push_back(factor_to_json(f));
    return {{"sender", msg.sender}, {"receiver", msg.receiver}, {"step", msg.step}, {"factors", factors}};
}

FusionMessage message_from_json(const json& j) {
    return parse_guard("message", [&] {
        FusionMessage msg;
        msg.sender = j.at("sender").get<AgentId>();
        msg.receiver = j.at("receiver").get<AgentId>();
        msg.step = j.at("step").get<int>();
        for (const auto& f : j.at("factors")) msg.factors.push_back(factor_from_json(f));
        return msg;
    });
}

std::string encode_message(const FusionMessage& msg) { return message_to_json(msg).dump(); }

FusionMessage decode_message(const std::string& text) {
    return message_from_json(parse_guard("message", [&] { return json::parse(text); }));
}

json graph_to_json(const FactorGraph& g) {
    json factors = json::array();
    for (const auto& [id, f] : g.factors()) {
        const auto n = f.dim();
        std::vector<double> lambda;
        lambda.reserve(static_cast<std::size_t>(n * n));
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) lambda.push_back(f.lambda()(r, c));
        factors.push_back({{"id", id},
                           {"scope", scope_to_json(f.scope())},
                           {"zeta", std::vector<double>(f.zeta().data(), f.zeta().data() + n)},
                           {"lambda", lambda}});
    }
    return {{"variables", scope_to_json(g.variables())}, {"factors", factors}};
}

FactorGraph graph_from_json(const json& j) {
    return parse_guard("graph snapshot", [&] {
        FactorGraph g;
        for (const auto& v : scope_from_json(j.at("variables"))) g.add_variable(v);
        for (const auto& f : j.at("factors")) {
            Scope scope = scope_from_json(f.at("scope"));
            const auto zeta = f.at("zeta").get<std::vector<double>>();
            const auto lambda = f.at("lambda").get<std::vector<double>>();
            const int n = scope_dim(scope);
            if (static_cast<int>(zeta.size()) != n || static_cast<int>(lambda.size()) != n * n)
                throw ProtocolError("snapshot factor does not match its scope dimension");
            Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(zeta.data(), n);
            Eigen::MatrixXd l = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                lambda.data(), n, n);
            g.add_factor(CanonicalFactor(std::move(scope), std::move(z), std::move(l)));
        }
        return g;
    });
}

}  // namespace fgddf::wire
