#include <doctest.h>

#include <random>

#include "fgddf/factor_graph.hpp"
#include "fgddf/inference.hpp"
#include "oracles.hpp"

using namespace fgddf;
using oracle::rel_err;

namespace {

Eigen::MatrixXd s1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }
Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

CanonicalFactor prior(const std::string& name, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    return from_moment({{{name, static_cast<int>(mean.size())}}, mean, cov});
}

MomentGaussian marginal_of(const FactorGraph& g, const std::string& name) {
    return to_moment(marginalize(g.joint(), {name}));
}

// Runs a filter through the graph API against the moment-form Kalman oracle.
double kalman_equivalence(int n, int m, int p, int steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Eigen::MatrixXd F = oracle::random_matrix(n, n, rng) * 0.5 + Eigen::MatrixXd::Identity(n, n) * 0.5;
    const Eigen::MatrixXd G = oracle::random_matrix(n, m, rng);
    const Eigen::MatrixXd Q = oracle::random_spd(n, rng, 0.2);
    const Eigen::MatrixXd H = oracle::random_matrix(p, n, rng);
    const Eigen::MatrixXd R = oracle::random_spd(p, rng, 0.5);

    oracle::Kalman kf{oracle::random_vector(n, rng), oracle::random_spd(n, rng, 1.0)};
    FactorGraph g;
    g.add_variable({"x000", n});
    g.add_factor(prior("x000", kf.x, kf.P));

    double worst = 0.0;
    std::string cur = "x000";
    for (int k = 1; k <= steps; ++k) {
        const Eigen::VectorXd u = oracle::random_vector(m, rng);
        char buf[16];
        std::snprintf(buf, sizeof buf, "x%03d", k);
        const std::string next = buf;
        predict(g, cur, next, {F, G, u, Q});
        rollup(g, cur);
        kf.predict(F, G, u, Q);

        const Eigen::VectorXd y = H * kf.x + oracle::random_vector(p, rng);
        measurement_update(g, {next}, {H, R, y});
        kf.update(H, R, y);
        cur = next;

        REQUIRE(g.num_variables() == 1);
        const MomentGaussian mg = to_moment(g.joint());
        worst = std::max({worst, rel_err(mg.mean, kf.x), rel_err(mg.covariance, kf.P)});
    }
    return worst;
}

}  // namespace

TEST_CASE("graph construction examples") {
    FactorGraph g;
    g.add_variable({"x", 2});
    const CanonicalFactor p = prior("x", Eigen::Vector2d(1, 2), Eigen::Matrix2d::Identity() * 2);
    g.add_factor(p);
    CHECK(relative_difference(g.joint(), p) == 0.0);

    const CanonicalFactor before = g.joint();
    g.add_factor(CanonicalFactor::zero({{"x", 2}}));
    CHECK(relative_difference(g.joint(), before) == 0.0);

    const FactorId id = g.add_factor(CanonicalFactor({{"x", 2}}, Eigen::Vector2d(3, 1), Eigen::Matrix2d::Identity()));
    g.remove_factor(id);
    CHECK(g.joint().zeta() == before.zeta());
    CHECK(g.joint().lambda() == before.lambda());
}

TEST_CASE("graph structural errors") {
    FactorGraph g;
    g.add_variable({"x", 1});
    CHECK_THROWS_AS(g.add_variable({"x", 1}), GraphError);
    CHECK_THROWS_AS(g.add_variable({"bad", 0}), GraphError);
    CHECK_THROWS_AS(g.add_factor(CanonicalFactor({{"y", 1}}, v1(0), s1(1))), GraphError);
    CHECK_THROWS_AS(g.add_factor(CanonicalFactor({{"x", 2}}, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity())),
                    DimensionMismatch);
    CHECK_THROWS_AS(g.remove_factor(99), GraphError);
    const FactorId id = g.add_factor(CanonicalFactor({{"x", 1}}, v1(0), s1(1)));
    CHECK_THROWS_AS(g.remove_variable("x"), GraphError);
    g.remove_factor(id);
    g.remove_variable("x");
    CHECK(g.num_variables() == 0);
}

TEST_CASE("factor ids are never reused") {
    FactorGraph g;
    g.add_variable({"x", 1});
    const FactorId a = g.add_factor(CanonicalFactor({{"x", 1}}, v1(0), s1(1)));
    g.remove_factor(a);
    const FactorId b = g.add_factor(CanonicalFactor({{"x", 1}}, v1(0), s1(1)));
    CHECK(b > a);
}

TEST_CASE("joint is invariant to insertion order") {
    std::mt19937_64 rng(21);
    std::vector<CanonicalFactor> fs;
    for (int i = 0; i < 6; ++i) {
        const Scope s = {{"a", 1}, {i % 2 ? "b" : "c", 2}};
        fs.emplace_back(s, oracle::random_vector(3, rng), oracle::random_spd(3, rng));
    }
    FactorGraph g1, g2;
    for (auto* g : {&g1, &g2}) {
        g->add_variable({"a", 1});
        g->add_variable({"b", 2});
        g->add_variable({"c", 2});
    }
    for (const auto& f : fs) g1.add_factor(f);
    for (auto it = fs.rbegin(); it != fs.rend(); ++it) g2.add_factor(*it);
    CHECK(relative_difference(g1.joint(), g2.joint()) <= 1e-12);
}

TEST_CASE("predict scalar factors") {
    FactorGraph g;
    g.add_variable({"x0", 1});
    const PredictionFactors pf = predict(g, "x0", "x1", {s1(1), s1(0), v1(0), s1(1)});
    CHECK(g.has_variable("x1"));
    CHECK(g.num_factors() == 3);
    const auto& fo = g.factor(pf.old_state);
    const auto& fn = g.factor(pf.new_state);
    const auto& ft = g.factor(pf.transition);
    CHECK(fo.names() == NameList{"x0"});
    CHECK(fo.zeta()(0) == 0);
    CHECK(fo.lambda()(0, 0) == 1);
    CHECK(fn.names() == NameList{"x1"});
    CHECK(fn.zeta()(0) == 0);
    CHECK(fn.lambda()(0, 0) == 1);
    CHECK(ft.names() == NameList{"x0", "x1"});
    CHECK(ft.zeta().isZero());
    CHECK(ft.lambda()(0, 1) == -1);
    CHECK(ft.lambda()(0, 0) == 0);
    CHECK(ft.lambda()(1, 1) == 0);
}

TEST_CASE("predict marginal equals Kalman prediction") {
    FactorGraph g;
    g.add_variable({"x0", 1});
    g.add_factor(prior("x0", v1(0), s1(1)));
    predict(g, "x0", "x1", {s1(1), s1(0), v1(0), s1(1)});
    const MomentGaussian m = marginal_of(g, "x1");
    CHECK(m.mean(0) == doctest::Approx(0.0));
    CHECK(m.covariance(0, 0) == doctest::Approx(2.0));

    std::mt19937_64 rng(22);
    for (int t = 0; t < 50; ++t) {
        const int n = 3, mu = 2;
        oracle::Kalman kf{oracle::random_vector(n, rng), oracle::random_spd(n, rng)};
        const Eigen::MatrixXd F = oracle::random_matrix(n, n, rng), G = oracle::random_matrix(n, mu, rng);
        const Eigen::VectorXd u = oracle::random_vector(mu, rng);
        const Eigen::MatrixXd Q = oracle::random_spd(n, rng);
        FactorGraph h;
        h.add_variable({"a", n});
        h.add_factor(prior("a", kf.x, kf.P));
        predict(h, "a", "b", {F, G, u, Q});
        kf.predict(F, G, u, Q);
        const MomentGaussian mb = marginal_of(h, "b");
        CHECK(rel_err(mb.mean, kf.x) <= 1e-9);
        CHECK(rel_err(mb.covariance, kf.P) <= 1e-9);
    }
}

TEST_CASE("predict input errors") {
    FactorGraph g;
    g.add_variable({"x0", 2});
    const Eigen::MatrixXd I = Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS(predict(g, "x0", "x1", {s1(1), s1(0), v1(0), s1(1)}), DimensionMismatch);
    CHECK_THROWS_AS(predict(g, "x0", "x1", {I, Eigen::MatrixXd::Zero(2, 1), v1(0), -I}), NotADistribution);
    CHECK_THROWS_AS(predict(g, "nope", "x1", {I, Eigen::MatrixXd::Zero(2, 1), v1(0), I}), GraphError);
    CHECK_THROWS_AS(predict(g, "x0", "x0", {I, Eigen::MatrixXd::Zero(2, 1), v1(0), I}), GraphError);
}

TEST_CASE("rollup examples") {
    // chain x0 - f - x1 with priors on both
    FactorGraph g;
    g.add_variable({"x0", 1});
    g.add_variable({"x1", 1});
    g.add_factor(prior("x0", v1(1), s1(2)));
    g.add_factor(prior("x1", v1(-1), s1(3)));
    Eigen::Matrix2d l;
    l << 1, -0.5, -0.5, 1;
    g.add_factor(CanonicalFactor({{"x0", 1}, {"x1", 1}}, Eigen::Vector2d(0.2, 0.1), l));
    const CanonicalFactor expect = marginalize(g.joint(), {"x1"});
    rollup(g, "x0");
    CHECK_FALSE(g.has_variable("x0"));
    for (const auto& [_, f] : g.factors()) CHECK(f.names() == NameList{"x1"});
    CHECK(relative_difference(g.joint(), expect) <= 1e-12);

    // isolated variable with one unary factor
    FactorGraph h;
    h.add_variable({"v", 1});
    h.add_variable({"w", 1});
    h.add_factor(prior("v", v1(0), s1(1)));
    h.add_factor(prior("w", v1(0), s1(1)));
    rollup(h, "v");
    CHECK_FALSE(h.has_variable("v"));
    CHECK(h.num_factors() == 1);

    // star v - {a, b}: new factor joins a and b
    FactorGraph s;
    for (const char* n : {"v", "a", "b"}) s.add_variable({n, 1});
    s.add_factor(prior("v", v1(0), s1(1)));
    s.add_factor(CanonicalFactor({{"v", 1}, {"a", 1}}, Eigen::Vector2d::Zero(), l));
    s.add_factor(CanonicalFactor({{"v", 1}, {"b", 1}}, Eigen::Vector2d::Zero(), l));
    CHECK(s.markov_blanket("v") == NameList{"a", "b"});
    rollup(s, "v");
    bool joined = false;
    for (const auto& [_, f] : s.factors()) joined |= f.names() == NameList{"a", "b"};
    CHECK(joined);
}

TEST_CASE("rollup of an uninformed variable is singular") {
    FactorGraph g;
    g.add_variable({"x", 1});
    g.add_variable({"y", 1});
    g.add_factor(prior("y", v1(0), s1(1)));
    CHECK_THROWS_AS(rollup(g, "x"), SingularBlock);
    CHECK(g.has_variable("x"));
    CHECK_THROWS_AS(rollup(g, "zz"), GraphError);
}

TEST_CASE("rollup preserves surviving marginals") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 50; ++t) {
        FactorGraph g;
        const NameList names = {"a", "b", "c", "d", "e"};
        for (const auto& n : names) g.add_variable({n, 2});
        for (const auto& n : names) g.add_factor(prior(n, oracle::random_vector(2, rng), oracle::random_spd(2, rng)));
        for (int k = 0; k < 6; ++k) {
            std::uniform_int_distribution<int> pick(0, 4);
            const int i = pick(rng), j = pick(rng);
            if (i == j) continue;
            const Eigen::MatrixXd H = oracle::random_matrix(2, 4, rng);
            measurement_update(g, {names[static_cast<std::size_t>(i)], names[static_cast<std::size_t>(j)]},
                               {H, oracle::random_spd(2, rng), oracle::random_vector(2, rng)});
        }
        const CanonicalFactor expect = marginalize(g.joint(), {"a", "d", "e"});
        rollup(g, "b");
        rollup(g, "c");
        CHECK(relative_difference(g.joint(), expect) <= 1e-9);
    }
}

TEST_CASE("measurement factor examples") {
    const CanonicalFactor f = measurement_factor({{"x", 1}}, {s1(1), s1(1), v1(1)});
    CHECK(f.zeta()(0) == 1);
    CHECK(f.lambda()(0, 0) == 1);

    FactorGraph g;
    g.add_variable({"x", 1});
    g.add_factor(prior("x", v1(0), s1(1)));
    measurement_update(g, {"x"}, {s1(1), s1(1), v1(2)});
    const MomentGaussian m = to_moment(g.joint());
    CHECK(m.mean(0) == doctest::Approx(1.0));
    CHECK(m.covariance(0, 0) == doctest::Approx(0.5));

    Eigen::MatrixXd H(1, 2);
    H << 1, -1;
    const double r = 4.0;
    const CanonicalFactor rel = measurement_factor({{"L", 1}, {"b", 1}}, {H, s1(r), v1(3)});
    Eigen::Matrix2d expect;
    expect << 1, -1, -1, 1;
    CHECK(rel_err(rel.lambda(), expect / r) <= 1e-15);
    CHECK(rel_err(rel.zeta(), Eigen::Vector2d(3, -3) / r) <= 1e-15);
}

TEST_CASE("measurement column order follows the caller") {
    // H columns given as (b, a) must land on the right variables after sorting.
    Eigen::MatrixXd H(1, 2);
    H << 2, 0;
    const CanonicalFactor f = measurement_factor({{"b", 1}, {"a", 1}}, {H, s1(1), v1(1)});
    CHECK(f.names() == NameList{"a", "b"});
    CHECK(f.lambda()(0, 0) == 0);
    CHECK(f.lambda()(1, 1) == 4);
    CHECK(f.zeta()(1) == 2);
}

TEST_CASE("measurement adds exactly H^T R^-1 H") {
    std::mt19937_64 rng(24);
    FactorGraph g;
    g.add_variable({"a", 2});
    g.add_variable({"b", 3});
    g.add_factor(prior("a", oracle::random_vector(2, rng), oracle::random_spd(2, rng)));
    g.add_factor(prior("b", oracle::random_vector(3, rng), oracle::random_spd(3, rng)));
    const CanonicalFactor before = g.joint();
    const Eigen::MatrixXd H = oracle::random_matrix(2, 5, rng);
    const Eigen::MatrixXd R = oracle::random_spd(2, rng);
    const Eigen::VectorXd y = oracle::random_vector(2, rng);
    measurement_update(g, {"a", "b"}, {H, R, y});
    const CanonicalFactor added = g.joint() - before;
    const Eigen::MatrixXd expect = H.transpose() * R.inverse() * H;
    CHECK(rel_err(added.lambda(), expect) <= 1e-12);
    CHECK(rel_err(added.zeta(), H.transpose() * R.inverse() * y) <= 1e-12);
}

TEST_CASE("measurement input errors") {
    FactorGraph g;
    g.add_variable({"x", 1});
    CHECK_THROWS_AS(measurement_update(g, {"x"}, {s1(1), s1(-1), v1(0)}), NotADistribution);
    CHECK_THROWS_AS(measurement_update(g, {"x"}, {Eigen::MatrixXd::Ones(1, 2), s1(1), v1(0)}), DimensionMismatch);
    CHECK_THROWS_AS(measurement_update(g, {"y"}, {s1(1), s1(1), v1(0)}), GraphError);
}

TEST_CASE("predict, rollup and update track a Kalman filter") {
    CHECK(kalman_equivalence(1, 1, 1, 100, 25) <= 1e-9);
    CHECK(kalman_equivalence(4, 2, 3, 100, 26) <= 1e-9);
}
