#include <doctest.h>

#include <Eigen/Dense>

#include <array>
#include <thread>

#include "gds/reduction.hpp"
#include "gds/verify.hpp"
#include "oracle_dense.hpp"

using namespace gds;

namespace {

CoefficientMatrix matrix_from(std::initializer_list<std::initializer_list<double>> rows) {
    CoefficientMatrix A;
    A.k = static_cast<int>(rows.size()) - 1;
    A.n = static_cast<int>(rows.begin()->size()) - 1;
    A.entries.resize(A.k + 1, A.n + 1);
    int i = 0;
    for (const auto& row : rows) {
        int j = 0;
        for (double v : row) A.entries(i, j++) = v;
        ++i;
    }
    return A;
}

CenterConfig random_centers(int rows, int cols, std::uint64_t seed) {
    Eigen::MatrixXd m(rows, cols);
    std::uint64_t idx = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = 2.0 * sample_unit(seed, 13, idx++) - 1.0;
    return CenterConfig{m};
}

CoefficientMatrix random_full_rank(int n, std::uint64_t seed) {
    CoefficientMatrix A;
    A.n = n;
    A.k = 2 * n;
    A.entries.resize(A.k + 1, n + 1);
    for (;;) {
        std::uint64_t idx = 0;
        for (int i = 0; i <= A.k; ++i) {
            for (int j = 0; j <= n; ++j) {
                const double mag = 0.5 + 1.5 * sample_unit(seed, 17, idx++);
                A.entries(i, j) = sample_unit(seed, 18, idx++) < 0.5 ? -mag : mag;
            }
        }
        if (numerical_rank(A.entries) == n + 1) return A;
        ++seed;
    }
}

CoefficientMatrix random_deficient(int n, int k, int rank, std::uint64_t seed) {
    CoefficientMatrix A;
    A.n = n;
    A.k = k;
    for (;;) {
        Eigen::MatrixXd u(k + 1, rank), v(rank, n + 1);
        std::uint64_t idx = 0;
        for (int i = 0; i <= k; ++i)
            for (int j = 0; j < rank; ++j) {
                const double mag = 0.5 + 1.5 * sample_unit(seed, 19, idx++);
                u(i, j) = sample_unit(seed, 20, idx++) < 0.5 ? -mag : mag;
            }
        for (int i = 0; i < rank; ++i)
            for (int j = 0; j <= n; ++j) {
                const double mag = 0.5 + 1.5 * sample_unit(seed, 21, idx++);
                v(i, j) = sample_unit(seed, 22, idx++) < 0.5 ? -mag : mag;
            }
        A.entries = u * v;
        if (validate_matrix(A).ok && numerical_rank(A.entries) == rank) return A;
        ++seed;
    }
}

// Recompose the produced chains with the dense oracle and compare against
// the sparse pipeline's result.
double oracle_chain_residual(const ReductionResult& res, const PolyMap& g) {
    std::vector<oracle::Dense> acc;
    for (int i = 0; i < g.n_components(); ++i) acc.push_back(oracle::from_component(g, i));

    const int n_vars = g.n_vars();
    for (const ElementaryTransform& t : res.source_chain) {
        // acc ∘ t: substitute the transform into every accumulated component.
        std::vector<oracle::Dense> inner;
        for (int i = 0; i < n_vars; ++i) inner.push_back(oracle::from_component(t.forward, i));
        for (auto& comp : acc) comp = oracle::substitute(comp, inner);
    }
    for (const ElementaryTransform& t : res.target_chain) {
        // t ∘ acc.
        std::vector<oracle::Dense> next;
        for (int i = 0; i < t.forward.n_components(); ++i) {
            next.push_back(oracle::substitute(oracle::from_component(t.forward, i), acc));
        }
        acc = std::move(next);
    }
    return oracle::max_diff(acc, res.reduced);
}

} // namespace

TEST_CASE("stage-1 solves reproduce the frozen 2x2 example") {
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {1, 1}});
    const auto [l1, l2] = solve_lambda(A);
    Eigen::MatrixXd expected1(2, 2);
    expected1 << 2, -1, -1, 1;
    CHECK((l1 - expected1).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::VectorXd expected2(2);
    expected2 << -1, 0;
    CHECK((l2 - expected2).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((A.top_block().transpose() * l1 - Eigen::MatrixXd::Identity(2, 2)).norm() <=
          1e-10 * A.entries.norm());
    CHECK((A.top_block().transpose() * l2 + A.bottom_block().transpose()).norm() <=
          1e-10 * A.entries.norm());
}

TEST_CASE("linear part vanishes for centered instances") {
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
    const CenterConfig p{Eigen::MatrixXd::Zero(3, 2)};
    const auto [l1, l2] = solve_lambda(A);
    const LinearPart lin = linear_part(p, A, l1, l2);
    CHECK(lin.b.cwiseAbs().maxCoeff() == 0.0);
    CHECK(lin.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stage-1 composite has unit squares up top and no quadratics below") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const int n = 1 + static_cast<int>(seed % 2);
        const CoefficientMatrix A = random_full_rank(n, seed);
        const PivotPlan plan = select_pivot(A, Branch::FullRank);
        const CoefficientMatrix ap = permuted_matrix(A, plan);
        const CenterConfig pp =
            permuted_centers(random_centers(2 * n + 1, n + 1, seed + 31), plan);
        const auto [l1, l2] = solve_lambda(ap);
        const LinearPart lin = linear_part(pp, ap, l1, l2);
        CHECK(lin.selfcheck_error <= 1e-10);
        const PolyMap phi1 =
            apply_target(stage1_transform(n, l1, l2), build_gds(pp, ap));
        for (int i = 0; i <= 2 * n; ++i) {
            for (int a = 0; a <= n; ++a) {
                for (int b = a; b <= n; ++b) {
                    Exponents e(n + 1, 0);
                    e[a] += 1;
                    e[b] += 1;
                    const double expected = (i <= n && a == i && b == i) ? 1.0 : 0.0;
                    CHECK(std::abs(phi1.coefficient(i, e) - expected) <= 1e-10);
                }
            }
        }
    }
}

TEST_CASE("certificate for the 1-dimensional worked example") {
    // b rows: (1,2), (3,4), affine (5,7).
    Eigen::MatrixXd b(3, 2);
    b << 1, 2, 3, 4, 5, 7;
    SUBCASE("determinants and verdicts") {
        Eigen::MatrixXd bb = b;
        GammaSolution gamma = solve_gamma(bb, 1);
        CHECK(gamma.gamma(0, 0) == doctest::Approx(-2.0 / 7.0));
        CHECK(gamma.d_diag(0) == doctest::Approx(-3.0 / 7.0));
        CHECK(gamma.gamma(0, 1) == doctest::Approx(-3.0 / 5.0));
        CHECK(gamma.d_diag(1) == doctest::Approx(-1.0 / 5.0));
        // Kernel output copies the affine row with positive leading sign.
        CHECK(gamma.gamma(0, 2) == doctest::Approx(1.0));
        CHECK(gamma.d_aff_x0(0) == doctest::Approx(5.0));
        CHECK(gamma.d_aff_xj(0) == doctest::Approx(7.0));
    }
}

TEST_CASE("certificate determinants are the deleted-column minors") {
    // Centered first block with trailing center (-2.5, -3.5) under unit
    // weights produces the linear row (5, 7).
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {1, 1}});
    Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(3, 2);
    pts.row(2) << -2.5, -3.5;
    const BadSetCertificate cert =
        badset_certificate(CenterConfig{pts}, A, Branch::FullRank);
    REQUIRE(cert.entries.size() == 2);
    CHECK(cert.entries[0].determinant == doctest::Approx(7.0));
    CHECK(cert.entries[1].determinant == doctest::Approx(5.0));
    CHECK(cert.entries[0].outside);
    CHECK(cert.entries[1].outside);
    CHECK(cert.all_outside);
}

TEST_CASE("certificate labels deleting one column each") {
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
    // Centers chosen so the affine row of b is nonzero in both slots.
    const CenterConfig p = random_centers(3, 2, 3);
    const BadSetCertificate cert = badset_certificate(p, A, Branch::FullRank);
    REQUIRE(cert.entries.size() == 2);
    CHECK(cert.entries[0].label == "det B_0");
    CHECK(cert.entries[1].label == "det B_1");
    CHECK(cert.all_outside);
}

TEST_CASE("constructed center on the exceptional set is flagged") {
    // First-block centers at the origin make the affine-row coefficients
    // plain multiples of the trailing center; zeroing its second slot zeroes
    // the minor that deletes column 1... i.e. the one labeled det B_0.
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
    Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(3, 2);
    pts(2, 0) = 0.8;
    pts(2, 1) = 0.0;
    const BadSetCertificate cert = badset_certificate(CenterConfig{pts}, A,
                                                      Branch::FullRank);
    CHECK_FALSE(cert.all_outside);
    CHECK(cert.entries[0].label == "det B_0");
    CHECK(std::abs(cert.entries[0].determinant) <= 1e-14);
    CHECK_FALSE(cert.entries[0].outside);
    CHECK(cert.entries[1].outside);

    try {
        reduce_full_rank(CenterConfig{pts}, A);
        FAIL("expected a rejection");
    } catch (const BadSetError& err) {
        // The thrown error carries the certificate with the zero determinant.
        CHECK_FALSE(err.certificate().all_outside);
        CHECK(err.certificate().entries[0].label == "det B_0");
        CHECK(std::abs(err.certificate().entries[0].determinant) <= 1e-14);
    }
}

TEST_CASE("zero linear row gives a zero gamma column and zero diagonal d") {
    Eigen::MatrixXd b(3, 2);
    b << 0, 0, 3, 4, 5, 7;
    const GammaSolution gamma = solve_gamma(b, 1);
    CHECK(gamma.gamma(0, 0) == 0.0);
    CHECK(gamma.d_diag(0) == 0.0);
}

TEST_CASE("full-rank reduction reaches the umbrella normal form") {
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const CenterConfig p = random_centers(3, 2, seed);
        ReductionResult res;
        try {
            res = reduce_full_rank(p, A);
        } catch (const BadSetError&) {
            continue; // exceptional draw; covered elsewhere
        }
        CHECK(res.kind == NormalFormKind::WhitneyUmbrella);
        CHECK(res.residual <= 1e-9);
        const PolyMap g = build_gds(p, A);
        CHECK(oracle_chain_residual(res, g) <=
              1e-9 * std::max(1.0, g.max_abs_coefficient()));

        // Transported origin is a singular point of the original map.
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(g.jacobian_at(res.source_origin()));
        CHECK(svd.singularValues()(1) <= 1e-8 * svd.singularValues()(0));
    }
}

TEST_CASE("full-rank reduction at n = 2 and n = 3") {
    for (int n = 2; n <= 3; ++n) {
        const CoefficientMatrix A = random_full_rank(n, 400 + n);
        const CenterConfig p = random_centers(2 * n + 1, n + 1, 900 + n);
        const ReductionResult res = reduce_full_rank(p, A);
        CHECK(res.residual <= 1e-9);
        const PolyMap g = build_gds(p, A);
        CHECK(oracle_chain_residual(res, g) <=
              1e-9 * std::max(1.0, g.max_abs_coefficient()));
    }
}

TEST_CASE("trace snapshots replay the applied transforms") {
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
    const CenterConfig p = random_centers(3, 2, 5);
    const ReductionResult res = reduce_full_rank(p, A);
    const PolyMap g = build_gds(p, A);

    std::size_t si = 0, ti = 0;
    PolyMap current = g;
    REQUIRE(res.trace.snapshots[0].first == "G");
    CHECK(res.trace.snapshots[0].second.coefficient_distance(g) == 0.0);
    for (std::size_t s = 1; s < res.trace.snapshots.size(); ++s) {
        const std::string& label = res.trace.snapshots[s].first;
        if (ti < res.target_chain.size() && res.target_chain[ti].label == label) {
            current = apply_target(res.target_chain[ti++], current);
        } else {
            REQUIRE(si < res.source_chain.size());
            REQUIRE(res.source_chain[si].label == label);
            current = apply_source(current, res.source_chain[si++]);
        }
        const double scale = 1.0 + current.max_abs_coefficient();
        CHECK(res.trace.snapshots[s].second.coefficient_distance(current) / scale <= 1e-10);
    }
    CHECK(si == res.source_chain.size());
    CHECK(ti == res.target_chain.size());
}

TEST_CASE("row dependence solves for the named matrices") {
    SUBCASE("all-ones") {
        const CoefficientMatrix A = distance_squared_matrix(1, 2);
        const Eigen::MatrixXd alpha = solve_alpha(A, 1);
        REQUIRE(alpha.rows() == 1);
        REQUIRE(alpha.cols() == 2);
        CHECK(alpha(0, 0) == doctest::Approx(-1.0));
        CHECK(alpha(0, 1) == doctest::Approx(-1.0));
    }
    SUBCASE("lorentzian") {
        const CoefficientMatrix A = lorentzian_matrix(1, 2);
        const Eigen::MatrixXd alpha = solve_alpha(A, 1);
        CHECK(alpha(0, 0) == doctest::Approx(-1.0));
        CHECK(alpha(0, 1) == doctest::Approx(-1.0));
    }
    SUBCASE("scaled row") {
        const CoefficientMatrix A = matrix_from({{1, 2}, {2, 4}, {3, 6}});
        const Eigen::MatrixXd alpha = solve_alpha(A, 1);
        CHECK(alpha(0, 0) == doctest::Approx(-2.0));
        CHECK(alpha(0, 1) == doctest::Approx(-3.0));
    }
}

TEST_CASE("deficient reduction reaches the inclusion for the named matrices") {
    for (int n = 1; n <= 2; ++n) {
        for (bool lorentz : {false, true}) {
            const CoefficientMatrix A = lorentz ? lorentzian_matrix(n, 2 * n)
                                                : distance_squared_matrix(n, 2 * n);
            const CenterConfig p = random_centers(2 * n + 1, n + 1,
                                                  1000 + n * 10 + lorentz);
            const ReductionResult res = reduce_to_inclusion(p, A);
            CHECK(res.kind == NormalFormKind::Inclusion);
            CHECK(res.residual <= 1e-9);
            const PolyMap g = build_gds(p, A);
            CHECK(oracle_chain_residual(res, g) <=
                  1e-9 * std::max(1.0, g.max_abs_coefficient()));
        }
    }
}

TEST_CASE("deficient reduction across ranks and wide targets") {
    struct Case {
        int n, k, rank;
    };
    for (const Case c : {Case{1, 2, 1}, Case{2, 4, 1}, Case{2, 4, 2}, Case{1, 3, 1},
                         Case{1, 3, 2}, Case{1, 4, 2}, Case{2, 5, 3}, Case{2, 6, 2}}) {
        const CoefficientMatrix A = random_deficient(c.n, c.k, c.rank, 50 + c.k + c.rank);
        const CenterConfig p = random_centers(c.k + 1, c.n + 1, 60 + c.k * 7 + c.rank);
        const ReductionResult res = reduce_to_inclusion(p, A);
        CHECK(res.kind == NormalFormKind::Inclusion);
        CHECK(res.residual <= 1e-9);
        const PolyMap g = build_gds(p, A);
        CHECK(oracle_chain_residual(res, g) <=
              1e-9 * std::max(1.0, g.max_abs_coefficient()));
    }
}

TEST_CASE("reductions that need permutations carry them in the chains") {
    SUBCASE("row swap in the full-rank branch") {
        const CoefficientMatrix A = matrix_from({{1, 1}, {1, 1}, {1, 2}});
        const CenterConfig p = random_centers(3, 2, 33);
        const ReductionResult res = reduce_full_rank(p, A);
        CHECK(res.residual <= 1e-9);
        REQUIRE_FALSE(res.target_chain.empty());
        CHECK(res.target_chain[0].label == "perm_rows");
        CHECK(res.trace.row_order == std::vector<int>{0, 2, 1});
        const PolyMap g = build_gds(p, A);
        CHECK(oracle_chain_residual(res, g) <=
              1e-9 * std::max(1.0, g.max_abs_coefficient()));
    }
    SUBCASE("column permutation in the deficient branch") {
        const CoefficientMatrix A =
            matrix_from({{1, 1, 2}, {1, 1, 3}, {1, 1, 4}, {1, 1, 5}, {1, 1, 6}});
        const CenterConfig p = random_centers(5, 3, 34);
        const ReductionResult res = reduce_to_inclusion(p, A);
        CHECK(res.residual <= 1e-9);
        CHECK(res.trace.column_permutation_used);
        REQUIRE_FALSE(res.source_chain.empty());
        CHECK(res.source_chain[0].label == "perm_cols");
        const PolyMap g = build_gds(p, A);
        CHECK(oracle_chain_residual(res, g) <=
              1e-9 * std::max(1.0, g.max_abs_coefficient()));
    }
}

TEST_CASE("near-threshold determinants raise the conditioning warning") {
    // All-ones matrix: the linear block rows are -2 (p_i - p_0), so the
    // determinant scales with how far the offsets are from parallel.
    const CoefficientMatrix A = distance_squared_matrix(1, 2);
    CenterConfig p;
    p.points.resize(3, 2);
    p.points << 0.0, 0.0, 1.0, 1.0, 1.0, 1.0 + 7.5e-9;
    const BadSetCertificate passing = badset_certificate(p, A, Branch::Deficient);
    CHECK(passing.all_outside);
    CHECK(passing.any_warning);

    p.points(2, 1) = 1.0 + 5e-10;
    const BadSetCertificate failing = badset_certificate(p, A, Branch::Deficient);
    CHECK_FALSE(failing.all_outside);
    CHECK(failing.any_warning);

    p.points(2, 1) = 2.0;
    const BadSetCertificate clear = badset_certificate(p, A, Branch::Deficient);
    CHECK(clear.all_outside);
    CHECK_FALSE(clear.any_warning);
}

TEST_CASE("full rank at k = 2n is the wrong branch for the inclusion") {
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
    const CenterConfig p = random_centers(3, 2, 8);
    CHECK_THROWS_AS(reduce_to_inclusion(p, A), Error);
    try {
        reduce_to_inclusion(p, A);
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::WrongBranch);
    }
}

TEST_CASE("classify dispatches on rank and k") {
    SUBCASE("generic full rank goes to the umbrella") {
        const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
        const Classification c = classify(random_centers(3, 2, 9), A);
        CHECK_FALSE(c.bad_set);
        CHECK(c.kind == NormalFormKind::WhitneyUmbrella);
        REQUIRE(c.result.has_value());
    }
    SUBCASE("all-ones goes to the inclusion") {
        const Classification c =
            classify(random_centers(3, 2, 10), distance_squared_matrix(1, 2));
        CHECK_FALSE(c.bad_set);
        CHECK(c.kind == NormalFormKind::Inclusion);
    }
    SUBCASE("wide targets go to the inclusion regardless of rank") {
        const CoefficientMatrix A = random_full_rank(1, 123); // rank 2
        CoefficientMatrix wide;
        wide.n = 1;
        wide.k = 3;
        wide.entries.resize(4, 2);
        wide.entries.topRows(3) = A.entries;
        wide.entries.row(3) << 0.7, -1.3;
        REQUIRE(numerical_rank(wide.entries) == 2);
        const Classification c = classify(random_centers(4, 2, 11), wide);
        CHECK_FALSE(c.bad_set);
        CHECK(c.kind == NormalFormKind::Inclusion);
    }
    SUBCASE("constructed exceptional center reports the certificate") {
        const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
        Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(3, 2);
        pts(2, 0) = 0.8;
        const Classification c = classify(CenterConfig{pts}, A);
        CHECK(c.bad_set);
        CHECK_FALSE(c.result.has_value());
        CHECK_FALSE(c.certificate.all_outside);
    }
    SUBCASE("invalid instances are rejected") {
        CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 0}});
        CHECK_THROWS_AS(classify(random_centers(3, 2, 12), A), Error);
    }
}

TEST_CASE("branch dichotomy holds statistically") {
    int bad = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        const CoefficientMatrix A = random_full_rank(1, 5000 + t);
        const Classification c = classify(random_centers(3, 2, 6000 + t), A);
        if (c.bad_set) ++bad;
        else CHECK(c.kind == NormalFormKind::WhitneyUmbrella);
    }
    CHECK(bad <= 1);
}

TEST_CASE("reductions are safe to run concurrently") {
    const CoefficientMatrix A = matrix_from({{1, 1}, {1, 2}, {2, 1}});
    std::array<double, 4> residuals{};
    {
        std::vector<std::thread> workers;
        for (int t = 0; t < 4; ++t) {
            workers.emplace_back([&, t] {
                const ReductionResult res =
                    reduce_full_rank(random_centers(3, 2, 700 + t), A);
                residuals[t] = res.residual;
            });
        }
        for (auto& w : workers) w.join();
    }
    for (int t = 0; t < 4; ++t) {
        const ReductionResult serial = reduce_full_rank(random_centers(3, 2, 700 + t), A);
        CHECK(residuals[t] == serial.residual);
    }
}

TEST_CASE("umbrella outputs are singular somewhere, inclusions nowhere") {
    const CoefficientMatrix full = matrix_from({{1, 1}, {1, 2}, {2, 1}});
    const CenterConfig p = random_centers(3, 2, 21);
    const ReductionResult umb = reduce_full_rank(p, full);
    const PolyMap g = build_gds(p, full);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g.jacobian_at(umb.source_origin()));
    CHECK(svd.singularValues()(1) <= 1e-8 * svd.singularValues()(0));

    const ReductionResult inc =
        reduce_to_inclusion(random_centers(3, 2, 22), distance_squared_matrix(1, 2));
    const PolyMap gi = build_gds(random_centers(3, 2, 22), distance_squared_matrix(1, 2));
    SampleSpec spec{2.0, 200, 23};
    for (int s = 0; s < spec.count; ++s) {
        const Eigen::VectorXd x = sample_point(spec, 2, s);
        Eigen::JacobiSVD<Eigen::MatrixXd> js(gi.jacobian_at(x));
        CHECK(js.singularValues()(1) > 1e-8 * js.singularValues()(0));
    }
}
