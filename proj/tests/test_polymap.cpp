#include <doctest.h>

#include <Eigen/Dense>

#include "gds/polymap.hpp"
#include "gds/verify.hpp"
#include "oracle_dense.hpp"

using namespace gds;

namespace {

Exponents e(std::initializer_list<int> v) { return Exponents(v); }

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

// Small deterministic random map with the given shape and degree <= 2.
PolyMap random_quadratic_map(int n_vars, int m, std::uint64_t seed) {
    std::vector<std::vector<Term>> comps(m);
    std::uint64_t idx = 0;
    for (int i = 0; i < m; ++i) {
        for (int a = 0; a < n_vars; ++a) {
            Exponents sq(n_vars, 0);
            sq[a] = 2;
            comps[i].push_back({sq, sample_unit(seed, 7, idx++) * 2.0 - 1.0});
            Exponents lin(n_vars, 0);
            lin[a] = 1;
            comps[i].push_back({lin, sample_unit(seed, 7, idx++) * 2.0 - 1.0});
        }
        comps[i].push_back({Exponents(n_vars, 0), sample_unit(seed, 7, idx++) * 2.0 - 1.0});
    }
    return PolyMap(n_vars, std::move(comps));
}

} // namespace

TEST_CASE("eval matches direct monomial evaluation") {
    // (x0^2, x0*x1, x1)
    PolyMap f(2, {{{e({2, 0}), 1.0}},
                  {{e({1, 1}), 1.0}},
                  {{e({0, 1}), 1.0}}});
    const Eigen::VectorXd y = f.eval(vec2(2.0, 3.0));
    CHECK(y(0) == doctest::Approx(4.0));
    CHECK(y(1) == doctest::Approx(6.0));
    CHECK(y(2) == doctest::Approx(3.0));
}

TEST_CASE("identity evaluates to its argument") {
    PolyMap id = PolyMap::identity(2);
    const Eigen::VectorXd y = id.eval(vec2(-1.5, 0.25));
    CHECK(y(0) == -1.5);
    CHECK(y(1) == 0.25);
}

TEST_CASE("eval rejects dimension mismatch") {
    PolyMap id = PolyMap::identity(2);
    Eigen::VectorXd x(3);
    x.setZero();
    CHECK_THROWS_AS(id.eval(x), Error);
}

TEST_CASE("compose with identity outer leaves the map unchanged") {
    PolyMap f = random_quadratic_map(2, 3, 11);
    const PolyMap g = compose(PolyMap::identity(3), f);
    CHECK(g.coefficient_distance(f) == 0.0);
}

TEST_CASE("compose cancels exactly-cancelling terms to the empty form") {
    // outer = X0 - X1^2, inner = (x0^2, x0)
    PolyMap outer(2, {{{e({1, 0}), 1.0}, {e({0, 2}), -1.0}}});
    PolyMap inner(1, {{{e({2}), 1.0}}, {{e({1}), 1.0}}});
    const PolyMap g = compose(outer, inner);
    CHECK(g.n_components() == 1);
    CHECK(g.component(0).empty());
}

TEST_CASE("final stage shear over the squared pair produces the mixed form") {
    // f = (x0^2, (x1 - x0)^2, x1): the shape reached with unit mixing data.
    PolyMap f(2, {{{e({2, 0}), 1.0}},
                  {{e({2, 0}), 1.0}, {e({1, 1}), -2.0}, {e({0, 2}), 1.0}},
                  {{e({0, 1}), 1.0}}});
    // H = (X0, -1/2 (X1 - X0 - X2^2), X2)
    PolyMap h(3, {{{e({1, 0, 0}), 1.0}},
                  {{e({0, 1, 0}), -0.5}, {e({1, 0, 0}), 0.5}, {e({0, 0, 2}), 0.5}},
                  {{e({0, 0, 1}), 1.0}}});
    const PolyMap got = compose(h, f);

    // Independent dense expansion of the same composition.
    CHECK(oracle::max_diff(oracle::compose(h, f), got) <= 1e-12);

    PolyMap expected(2, {{{e({2, 0}), 1.0}},
                         {{e({1, 1}), 1.0}},
                         {{e({0, 1}), 1.0}}});
    CHECK(got.coefficient_distance(expected) <= 1e-12);
}

TEST_CASE("coefficient readout of an expanded offset quadric") {
    // 3(x0-1)^2 + 4(x1-2)^2 = 3x0^2 - 6x0 + 4x1^2 - 16x1 + 19
    PolyMap f(2, {{{e({2, 0}), 3.0},
                   {e({1, 0}), -6.0},
                   {e({0, 2}), 4.0},
                   {e({0, 1}), -16.0},
                   {e({0, 0}), 19.0}}});
    CHECK(f.coefficient(0, e({1, 0})) == -6.0);
    CHECK(f.coefficient(0, e({0, 0})) == 19.0);
    CHECK(f.coefficient(0, e({1, 1})) == 0.0);
}

TEST_CASE("jacobian of the umbrella normal form") {
    PolyMap f(2, {{{e({2, 0}), 1.0}},
                  {{e({1, 1}), 1.0}},
                  {{e({0, 1}), 1.0}}});
    // The differential drops rank only at the origin.
    Eigen::MatrixXd j0 = f.jacobian_at(vec2(0.0, 0.0));
    CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(j0).rank() == 1);
    Eigen::MatrixXd j1 = f.jacobian_at(vec2(0.5, -1.0));
    CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(j1).rank() == 2);
    Eigen::MatrixXd j2 = f.jacobian_at(vec2(0.0, -1.0));
    CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(j2).rank() == 2);
}

TEST_CASE("jacobian agrees with central finite differences") {
    const double step = 1e-6;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PolyMap f = random_quadratic_map(3, 4, seed);
        SampleSpec spec{1.5, 1, seed};
        const Eigen::VectorXd x = sample_point(spec, 3, 0);
        const Eigen::MatrixXd jac = f.jacobian_at(x);
        Eigen::MatrixXd fd(4, 3);
        for (int v = 0; v < 3; ++v) {
            Eigen::VectorXd hi = x, lo = x;
            hi(v) += step;
            lo(v) -= step;
            fd.col(v) = (f.eval(hi) - f.eval(lo)) / (2.0 * step);
        }
        const double scale = 1.0 + jac.cwiseAbs().maxCoeff();
        CHECK((jac - fd).cwiseAbs().maxCoeff() / scale <= 1e-6);
    }
}

TEST_CASE("compose is associative at coefficient level") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        PolyMap f = random_quadratic_map(3, 2, seed);
        PolyMap g = random_quadratic_map(2, 3, seed + 1000);
        // Innermost map affine so every grouping stays inside the degree cap.
        PolyMap h(2, {{{e({1, 0}), 0.5}, {e({0, 1}), -0.25}, {e({0, 0}), 0.125}},
                      {{e({0, 1}), 2.0}, {e({0, 0}), -1.0}}});
        const PolyMap left = compose(compose(f, g), h);
        const PolyMap right = compose(f, compose(g, h));
        const double scale = 1.0 + left.max_abs_coefficient();
        CHECK(left.coefficient_distance(right) / scale <= 1e-12);
    }
}

TEST_CASE("eval of a composition equals composed evals") {
    for (std::uint64_t seed = 50; seed < 55; ++seed) {
        PolyMap f = random_quadratic_map(3, 2, seed);
        PolyMap g = random_quadratic_map(2, 3, seed + 500);
        const PolyMap fg = compose(f, g);
        SampleSpec spec{2.0, 100, seed};
        for (int s = 0; s < spec.count; ++s) {
            const Eigen::VectorXd x = sample_point(spec, 2, s);
            const Eigen::VectorXd direct = f.eval(g.eval(x));
            const Eigen::VectorXd composed = fg.eval(x);
            CHECK((direct - composed).norm() / (1.0 + direct.norm()) <= 1e-10);
        }
    }
}

TEST_CASE("degree cap enforced") {
    CHECK_THROWS_AS(PolyMap(1, {{{e({5}), 1.0}}}), Error);
    PolyMap quartic(1, {{{e({4}), 1.0}}});
    PolyMap square(1, {{{e({2}), 1.0}}});
    CHECK_THROWS_AS(compose(square, quartic), Error);
}

TEST_CASE("canonical form merges duplicates and drops dust") {
    PolyMap f(1, {{{e({1}), 1.0}, {e({1}), 2.0}, {e({0}), 1e-20}}});
    REQUIRE(f.component(0).size() == 1);
    CHECK(f.component(0)[0].coef == 3.0);

    // Graded-lex ordering: constant, then linear, then quadratic.
    PolyMap g(2, {{{e({0, 2}), 1.0}, {e({0, 0}), 2.0}, {e({1, 0}), 3.0}}});
    CHECK(g.component(0)[0].exp == e({0, 0}));
    CHECK(g.component(0)[1].exp == e({1, 0}));
    CHECK(g.component(0)[2].exp == e({0, 2}));
}
