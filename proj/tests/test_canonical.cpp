#include <doctest.h>

#include <random>

#include "fgddf/canonical.hpp"
#include "oracles.hpp"

using namespace fgddf;
using oracle::rel_err;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double x : row) out(r, c++) = x;
        ++r;
    }
    return out;
}

Scope random_scope(int nvars, std::mt19937_64& rng, int max_dim = 3) {
    std::uniform_int_distribution<int> d(1, max_dim);
    Scope s;
    for (int i = 0; i < nvars; ++i) s.push_back({"v" + std::to_string(i), d(rng)});
    return s;
}

CanonicalFactor random_spd_factor(const Scope& s, std::mt19937_64& rng) {
    const int n = scope_dim(s);
    return CanonicalFactor(s, oracle::random_vector(n, rng), oracle::random_spd(n, rng));
}

CanonicalFactor random_factor(const Scope& s, std::mt19937_64& rng) {
    const int n = scope_dim(s);
    const Eigen::MatrixXd a = oracle::random_matrix(n, n, rng);
    return CanonicalFactor(s, oracle::random_vector(n, rng), a + a.transpose());
}

double factor_err(const CanonicalFactor& a, const CanonicalFactor& b) {
    REQUIRE(a.scope() == b.scope());
    return std::max(rel_err(a.zeta(), b.zeta()), rel_err(a.lambda(), b.lambda()));
}

}  // namespace

TEST_CASE("scope is stored in name order and lambda symmetrized") {
    const CanonicalFactor f({{"b", 1}, {"a", 2}}, vec({3, 1, 2}),
                            mat({{9, 0, 0}, {0, 1, 0.5}, {0, 0.25, 2}}));
    REQUIRE(f.scope().front().name == "a");
    CHECK(f.zeta()(0) == 1);
    CHECK(f.zeta()(1) == 2);
    CHECK(f.zeta()(2) == 3);
    CHECK(f.lambda()(0, 1) == doctest::Approx(0.375));
    CHECK(f.lambda()(1, 0) == f.lambda()(0, 1));
    CHECK(f.lambda()(2, 2) == 9);
    CHECK(f.offset("b") == 2);
    CHECK(f.offset("zz") == -1);
}

TEST_CASE("construction rejects shape errors and dim conflicts") {
    CHECK_THROWS_AS(CanonicalFactor({{"x", 2}}, vec({1}), mat({{1}})), DimensionMismatch);
    CHECK_THROWS_AS(CanonicalFactor({{"x", 1}}, vec({1}), mat({{1, 0}, {0, 1}})), DimensionMismatch);
    CHECK_THROWS_AS(canonical_scope({{"x", 1}, {"x", 2}}), DimensionMismatch);
    const CanonicalFactor a({{"x", 1}}, vec({1}), mat({{1}}));
    const CanonicalFactor b({{"x", 2}}, vec({1, 1}), Eigen::MatrixXd::Identity(2, 2));
    CHECK_THROWS_AS(a + b, DimensionMismatch);
}

TEST_CASE("factor_add examples") {
    const CanonicalFactor f({{"x", 1}}, vec({3}), mat({{4}}));
    CHECK(factor_err(CanonicalFactor::zero({{"x", 1}}) + f, f) == 0.0);

    const CanonicalFactor s = CanonicalFactor({{"x", 1}}, vec({1}), mat({{2}})) + f;
    CHECK(s.zeta()(0) == 4);
    CHECK(s.lambda()(0, 0) == 6);

    const CanonicalFactor a({{"a", 1}}, vec({1}), mat({{2}}));
    const CanonicalFactor ab({{"a", 1}, {"b", 1}}, vec({0, 1}), mat({{1, 1}, {1, 3}}));
    const CanonicalFactor sum = a + ab;
    REQUIRE(sum.names() == NameList{"a", "b"});
    CHECK(sum.zeta() == vec({1, 1}));
    CHECK(sum.lambda() == mat({{3, 1}, {1, 3}}));
}

TEST_CASE("factor_subtract examples") {
    std::mt19937_64 rng(11);
    const CanonicalFactor f = random_factor({{"x", 2}, {"y", 1}}, rng);
    CHECK((f - f).is_zero());
    CHECK((f - f).scope() == f.scope());

    const CanonicalFactor d = CanonicalFactor({{"x", 1}}, vec({4}), mat({{6}})) -
                              CanonicalFactor({{"x", 1}}, vec({3}), mat({{4}}));
    CHECK(d.zeta()(0) == 1);
    CHECK(d.lambda()(0, 0) == 2);

    for (int t = 0; t < 50; ++t) {
        const Scope s = {{"p", 1}, {"q", 1}, {"r", 1}};
        const CanonicalFactor a = random_factor(s, rng), b = random_factor(s, rng);
        CHECK(factor_err((a + b) - b, a) <= 1e-12);
    }
}

TEST_CASE("factor_add is commutative and associative") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 100; ++t) {
        const CanonicalFactor a = random_factor({{"x", 2}}, rng);
        const CanonicalFactor b = random_factor({{"x", 2}, {"y", 1}}, rng);
        const CanonicalFactor c = random_factor({{"y", 1}, {"z", 2}}, rng);
        CHECK(factor_err(a + b, b + a) <= 1e-12);
        CHECK(factor_err((a + b) + c, a + (b + c)) <= 1e-12);
        const CanonicalFactor s = (a + b) + c;
        CHECK(oracle::max_abs(s.lambda() - s.lambda().transpose()) == 0.0);
    }
}

TEST_CASE("marginalize examples") {
    const CanonicalFactor joint({{"a", 1}, {"b", 1}}, vec({0.2, 0.6}), mat({{0.6, -0.2}, {-0.2, 0.4}}));
    CHECK(factor_err(marginalize(joint, {"a", "b"}), joint) == 0.0);

    const CanonicalFactor m = marginalize(joint, {"a"});
    CHECK(m.zeta()(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.lambda()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    const MomentGaussian mg = to_moment(m);
    CHECK(mg.mean(0) == doctest::Approx(1.0));
    CHECK(mg.covariance(0, 0) == doctest::Approx(2.0));

    // Drop-and-invert agrees with the hand values.
    const auto [z, l] = oracle::drop_and_invert(joint.zeta(), joint.lambda(), {0});
    CHECK(z(0) == doctest::Approx(0.5));
    CHECK(l(0, 0) == doctest::Approx(0.5));

    Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(3, 3);
    blk.topLeftCorner(2, 2) = mat({{2, 0.5}, {0.5, 1}});
    blk(2, 2) = 5;
    const CanonicalFactor ind({{"x", 2}, {"y", 1}}, vec({1, 2, 3}), blk);
    const CanonicalFactor mx = marginalize(ind, {"x"});
    CHECK(mx.lambda() == blk.topLeftCorner(2, 2));
    CHECK(mx.zeta() == vec({1, 2}));
    const CanonicalFactor my = marginalize(ind, {"y"});
    CHECK(my.lambda()(0, 0) == 5);
    CHECK(my.zeta()(0) == 3);
}

TEST_CASE("marginalize rejects singular blocks and unknown variables") {
    const CanonicalFactor f({{"a", 1}, {"b", 1}}, vec({1, 0}), mat({{1, 0}, {0, 0}}));
    CHECK_THROWS_AS(marginalize(f, {"a"}), SingularBlock);
    CHECK_THROWS_AS(marginalize(f, {"c"}), DimensionMismatch);
    const CanonicalFactor ill({{"a", 1}, {"b", 2}}, vec({1, 0, 0}), mat({{1, 0, 0}, {0, 1, 0}, {0, 0, 1e-14}}));
    CHECK_THROWS_AS(marginalize(ill, {"a"}), SingularBlock);
}

TEST_CASE("marginalize matches drop-and-invert on random SPD factors") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> nv(2, 5);
    for (int t = 0; t < 200; ++t) {
        const Scope s = random_scope(nv(rng), rng);
        const CanonicalFactor f = random_spd_factor(s, rng);
        NameList keep;
        std::vector<int> idx;
        int off = 0;
        for (const auto& v : f.scope()) {
            if (std::bernoulli_distribution(0.5)(rng) || (keep.empty() && &v == &f.scope().back())) {
                keep.push_back(v.name);
                for (int d = 0; d < v.dim; ++d) idx.push_back(off + d);
            }
            off += v.dim;
        }
        const CanonicalFactor m = marginalize(f, keep);
        const auto [z, l] = oracle::drop_and_invert(f.zeta(), f.lambda(), idx);
        CHECK(rel_err(m.zeta(), z) <= 1e-9);
        CHECK(rel_err(m.lambda(), l) <= 1e-9);
    }
}

TEST_CASE("nested marginalization") {
    std::mt19937_64 rng(14);
    for (int t = 0; t < 100; ++t) {
        const CanonicalFactor f = random_spd_factor(random_scope(5, rng), rng);
        const CanonicalFactor direct = marginalize(f, {"v0", "v3"});
        const CanonicalFactor nested = marginalize(marginalize(f, {"v0", "v1", "v3"}), {"v0", "v3"});
        CHECK(factor_err(direct, nested) <= 1e-9);
    }
}

TEST_CASE("moment conversion examples and round trips") {
    const MomentGaussian m1 = to_moment(CanonicalFactor({{"x", 1}}, vec({0}), mat({{1}})));
    CHECK(m1.mean(0) == 0);
    CHECK(m1.covariance(0, 0) == 1);

    const MomentGaussian m2 = to_moment(CanonicalFactor({{"x", 2}}, vec({2, 2}), mat({{2, 0}, {0, 1}})));
    CHECK(rel_err(m2.mean, vec({1, 2})) <= 1e-15);
    CHECK(rel_err(m2.covariance, mat({{0.5, 0}, {0, 1}})) <= 1e-15);

    std::mt19937_64 rng(15);
    for (int t = 0; t < 100; ++t) {
        const CanonicalFactor f = random_spd_factor(random_scope(3, rng), rng);
        CHECK(factor_err(from_moment(to_moment(f)), f) <= 1e-9);
        const MomentGaussian g = to_moment(f);
        const MomentGaussian back = to_moment(from_moment(g));
        CHECK(rel_err(back.mean, g.mean) <= 1e-9);
        CHECK(rel_err(back.covariance, g.covariance) <= 1e-9);
    }
}

TEST_CASE("moment conversion rejects non-SPD input") {
    CHECK_THROWS_AS(to_moment(CanonicalFactor({{"x", 1}}, vec({0}), mat({{-1}}))), NotADistribution);
    CHECK_THROWS_AS(to_moment(CanonicalFactor({{"x", 2}}, vec({0, 0}), mat({{1, 2}, {2, 1}}))), NotADistribution);
    CHECK_THROWS_AS(from_moment({{{"x", 1}}, vec({0}), mat({{0}})}), NotADistribution);
}

TEST_CASE("select picks one variable") {
    const MomentGaussian g{{{"a", 1}, {"b", 2}}, vec({1, 2, 3}), mat({{1, 0, 0}, {0, 2, 0.5}, {0, 0.5, 3}})};
    const MomentGaussian b = g.select("b");
    CHECK(b.mean == vec({2, 3}));
    CHECK(b.covariance == mat({{2, 0.5}, {0.5, 3}}));
}

TEST_CASE("hscf_closed_form examples") {
    std::mt19937_64 rng(16);
    for (int t = 0; t < 50; ++t) {
        const Scope s = {{"s", 2}, {"x", 2}, {"y", 1}};
        const CanonicalFactor local = random_spd_factor(s, rng);
        const NameList x = {"x"};

        // Own marginal reassembles the local joint.
        CHECK(factor_err(hscf_closed_form(local, marginalize(local, x), x), local) <= 1e-9);

        // The reassembly carries the fused marginal on x.
        const CanonicalFactor fused = random_spd_factor({{"x", 2}}, rng);
        const CanonicalFactor out = hscf_closed_form(local, fused, x);
        CHECK(factor_err(marginalize(out, x), fused) <= 1e-9);

        // Moment-form oracle: x ~ fused, rest | x from the local conditional.
        const oracle::Moment lm = oracle::to_moment(local.zeta(), local.lambda());
        const oracle::Moment fm = oracle::to_moment(fused.zeta(), fused.lambda());
        const std::vector<int> xi = {2, 3}, ri = {0, 1, 4};
        const Eigen::MatrixXd Prx = oracle::select(lm, {0, 1, 4, 2, 3}).cov.topRightCorner(3, 2);
        const Eigen::MatrixXd Pxx = oracle::select(lm, xi).cov;
        const Eigen::MatrixXd A = Prx * Pxx.inverse();
        const Eigen::VectorXd b = oracle::select(lm, ri).mean - A * oracle::select(lm, xi).mean;
        const Eigen::MatrixXd Pcond = oracle::select(lm, ri).cov - A * Prx.transpose();
        oracle::Moment joint{Eigen::VectorXd(5), Eigen::MatrixXd(5, 5)};
        // order s(0,1) x(2,3) y(4)
        Eigen::VectorXd mr = A * fm.mean + b;
        Eigen::MatrixXd Crr = A * fm.cov * A.transpose() + Pcond;
        Eigen::MatrixXd Crx = A * fm.cov;
        const std::vector<int> ridx = {0, 1, 4};
        for (int i = 0; i < 3; ++i) {
            joint.mean(ridx[i]) = mr(i);
            for (int j = 0; j < 3; ++j) joint.cov(ridx[i], ridx[j]) = Crr(i, j);
            for (int j = 0; j < 2; ++j) joint.cov(ridx[i], xi[j]) = joint.cov(xi[j], ridx[i]) = Crx(i, j);
        }
        for (int i = 0; i < 2; ++i) {
            joint.mean(xi[i]) = fm.mean(i);
            for (int j = 0; j < 2; ++j) joint.cov(xi[i], xi[j]) = fm.cov(i, j);
        }
        const auto [z, l] = oracle::to_canonical(joint);
        CHECK(rel_err(out.zeta(), z) <= 1e-9);
        CHECK(rel_err(out.lambda(), l) <= 1e-9);
    }
}

TEST_CASE("hscf_closed_form rejects singular conditional block") {
    const CanonicalFactor f({{"s", 1}, {"x", 1}}, vec({0, 0}), mat({{0, 0}, {0, 1}}));
    CHECK_THROWS_AS(hscf_closed_form(f, CanonicalFactor({{"x", 1}}, vec({0}), mat({{1}})), {"x"}), SingularBlock);
}

TEST_CASE("expanded pads with zeros") {
    const CanonicalFactor f({{"b", 1}}, vec({2}), mat({{3}}));
    const CanonicalFactor e = f.expanded({{"a", 1}, {"b", 1}, {"c", 2}});
    CHECK(e.dim() == 4);
    CHECK(e.zeta() == vec({0, 2, 0, 0}));
    CHECK(e.lambda()(1, 1) == 3);
    CHECK(e.lambda().sum() == 3);
    CHECK_THROWS(f.expanded({{"a", 1}}));
}
