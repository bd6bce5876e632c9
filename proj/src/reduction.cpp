#include "gds/reduction.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gds {

namespace {

Exponents unit_exp(int n_vars, int v, int power = 1) {
    Exponents e(n_vars, 0);
    e[v] = power;
    return e;
}

// b and c readout from a stage-1 composite: c_i is the constant term of
// component i, b_ij the coefficient of x_j.
LinearPart read_linear_part(const PolyMap& phi) {
    const int m = phi.n_components();
    const int n_vars = phi.n_vars();
    LinearPart out;
    out.b.resize(m, n_vars);
    out.c.resize(m);
    const Exponents zero(n_vars, 0);
    for (int i = 0; i < m; ++i) {
        out.c(i) = phi.coefficient(i, zero);
        for (int j = 0; j < n_vars; ++j) {
            out.b(i, j) = phi.coefficient(i, unit_exp(n_vars, j));
        }
    }
    return out;
}

double hadamard_bound(const Eigen::MatrixXd& m) {
    double bound = 1.0;
    for (int i = 0; i < m.rows(); ++i) bound *= m.row(i).norm();
    return bound;
}

CertificateEntry make_entry(const std::string& label, double det, double scale,
                            double det_tol) {
    CertificateEntry e;
    e.label = label;
    e.determinant = det;
    e.scale = scale;
    e.outside = std::abs(det) > det_tol * scale;
    if (scale > 0.0) {
        const double margin = std::abs(det) / (det_tol * scale);
        e.warning = margin > 0.1 && margin <= 10.0;
    }
    return e;
}

void finalize_certificate(BadSetCertificate& cert) {
    cert.all_outside = true;
    cert.any_warning = false;
    for (const CertificateEntry& e : cert.entries) {
        cert.all_outside = cert.all_outside && e.outside;
        cert.any_warning = cert.any_warning || e.warning;
    }
}

// Columns b_l of the affine block with column j removed (full-rank branch).
Eigen::MatrixXd minor_without_column(const Eigen::MatrixXd& bottom, int j) {
    const int n = static_cast<int>(bottom.rows());
    Eigen::MatrixXd m(n, n);
    int col = 0;
    for (int l = 0; l < bottom.cols(); ++l) {
        if (l == j) continue;
        m.col(col++) = bottom.col(l);
    }
    return m;
}

BadSetCertificate full_rank_certificate(const Eigen::MatrixXd& b, int n, double det_tol) {
    // Affine-block columns: bottom(i, j) = b_{n+1+i, j}.
    const Eigen::MatrixXd bottom = b.bottomRows(n);
    BadSetCertificate cert;
    cert.branch = Branch::FullRank;
    cert.det_tol = det_tol;
    for (int j = 0; j <= n; ++j) {
        const Eigen::MatrixXd minor = minor_without_column(bottom, j);
        cert.entries.push_back(make_entry("det B_" + std::to_string(j),
                                          minor.determinant(), hadamard_bound(minor),
                                          det_tol));
    }
    finalize_certificate(cert);
    return cert;
}

// Greedy row selection on a tall matrix: returns row indices whose square
// submatrix the certificate tests (natural column order, lowest-index ties).
std::vector<int> select_square_rows(const Eigen::MatrixXd& m) {
    const int want = static_cast<int>(m.cols());
    Eigen::MatrixXd work = m;
    std::vector<bool> used(m.rows(), false);
    std::vector<int> rows;
    for (int c = 0; c < want; ++c) {
        int best_r = -1;
        double best = 0.0;
        for (int r = 0; r < m.rows(); ++r) {
            if (used[r]) continue;
            if (std::abs(work(r, c)) > best) {
                best = std::abs(work(r, c));
                best_r = r;
            }
        }
        if (best_r < 0) return {}; // rank collapse
        rows.push_back(best_r);
        used[best_r] = true;
        for (int r = 0; r < m.rows(); ++r) {
            if (used[r]) continue;
            work.row(r) -= (work(r, c) / work(best_r, c)) * work.row(best_r);
        }
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

BadSetCertificate deficient_certificate(const Eigen::MatrixXd& B, double det_tol) {
    BadSetCertificate cert;
    cert.branch = Branch::Deficient;
    cert.det_tol = det_tol;
    if (B.rows() == B.cols()) {
        cert.entries.push_back(make_entry("det B", B.determinant(), hadamard_bound(B),
                                          det_tol));
    } else {
        const std::vector<int> rows = select_square_rows(B);
        if (rows.empty()) {
            cert.entries.push_back(make_entry("det B", 0.0, 0.0, det_tol));
        } else {
            Eigen::MatrixXd sub(B.cols(), B.cols());
            std::ostringstream label;
            label << "det B[rows";
            for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
                sub.row(i) = B.row(rows[i]);
                label << " " << rows[i];
            }
            label << "]";
            cert.entries.push_back(make_entry(label.str(), sub.determinant(),
                                              hadamard_bound(sub), det_tol));
        }
    }
    finalize_certificate(cert);
    return cert;
}

// Max |coefficient| of a component outside an allowed monomial list.
double off_pattern(const PolyMap& map, int comp, const std::vector<Exponents>& allowed) {
    double worst = 0.0;
    for (const Term& t : map.component(comp)) {
        bool ok = false;
        for (const Exponents& e : allowed) {
            if (t.exp == e) {
                ok = true;
                break;
            }
        }
        if (!ok) worst = std::max(worst, std::abs(t.coef));
    }
    return worst;
}

void assert_shape(double defect, double scale, double tol, const std::string& where) {
    if (defect > tol * scale) {
        throw Error(ErrorCode::SelfCheckFailure,
                    where + ": stray coefficient " + std::to_string(defect) +
                    " exceeds tolerance");
    }
}

// Shared stage-1 state of the full-rank branch.
struct FullRankStage1 {
    PivotPlan plan;
    CoefficientMatrix A; // pivoted
    CenterConfig p;      // pivoted
    Eigen::MatrixXd lambda1, lambda2;
    ElementaryTransform h1;
    PolyMap phi1;
    LinearPart lin;
};

FullRankStage1 full_rank_stage1(const CenterConfig& p, const CoefficientMatrix& A,
                                const ToleranceConfig& tol) {
    FullRankStage1 s;
    s.plan = select_pivot(A, Branch::FullRank, tol.rank_tol);
    s.A = permuted_matrix(A, s.plan);
    s.p = permuted_centers(p, s.plan);
    std::tie(s.lambda1, s.lambda2) = solve_lambda(s.A);
    s.h1 = stage1_transform(A.n, s.lambda1, s.lambda2);
    s.phi1 = apply_target(s.h1, build_gds(s.p, s.A));
    s.lin = linear_part(s.p, s.A, s.lambda1, s.lambda2, tol.selfcheck_tol);

    // Stage-1 shape: unit pure squares up top, no quadratic terms below.
    const int n = A.n;
    const int n_vars = n + 1;
    const double scale = 1.0 + s.phi1.max_abs_coefficient();
    for (int i = 0; i <= 2 * n; ++i) {
        std::vector<Exponents> allowed;
        allowed.push_back(Exponents(n_vars, 0));
        for (int j = 0; j < n_vars; ++j) allowed.push_back(unit_exp(n_vars, j));
        if (i <= n) allowed.push_back(unit_exp(n_vars, i, 2));
        assert_shape(off_pattern(s.phi1, i, allowed), scale, tol.selfcheck_tol, "stage 1");
        if (i <= n) {
            const double sq = s.phi1.coefficient(i, unit_exp(n_vars, i, 2));
            if (std::abs(sq - 1.0) > tol.selfcheck_tol * scale) {
                throw Error(ErrorCode::SelfCheckFailure, "stage 1: square term not unit");
            }
        }
    }
    return s;
}

} // namespace

const char* normal_form_kind_name(NormalFormKind kind) {
    return kind == NormalFormKind::WhitneyUmbrella ? "whitney-umbrella" : "inclusion";
}

PolyMap whitney_umbrella_normal_form(int n) {
    const int n_vars = n + 1;
    std::vector<std::vector<Term>> comps(2 * n + 1);
    comps[0].push_back({unit_exp(n_vars, 0, 2), 1.0});
    for (int i = 1; i <= n; ++i) {
        Exponents e(n_vars, 0);
        e[0] = 1;
        e[i] = 1;
        comps[i].push_back({e, 1.0});
        comps[n + i].push_back({unit_exp(n_vars, i), 1.0});
    }
    return PolyMap(n_vars, std::move(comps));
}

PolyMap inclusion_normal_form(int n, int k) {
    const int n_vars = n + 1;
    std::vector<std::vector<Term>> comps(k + 1);
    for (int i = 0; i <= n; ++i) comps[i].push_back({unit_exp(n_vars, i), 1.0});
    return PolyMap(n_vars, std::move(comps));
}

PolyMap ReductionResult::normal_form() const {
    const int nn = n();
    const int kk = k();
    return kind == NormalFormKind::WhitneyUmbrella ? whitney_umbrella_normal_form(nn)
                                                   : inclusion_normal_form(nn, kk);
}

Eigen::VectorXd ReductionResult::source_origin() const {
    const PolyMap h = source_composite(source_chain, reduced.n_vars());
    return h.eval(Eigen::VectorXd::Zero(reduced.n_vars()));
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> solve_lambda(const CoefficientMatrix& A) {
    const int n = A.n;
    if (A.k != 2 * n) {
        throw Error(ErrorCode::DimensionMismatch, "solve_lambda: k != 2n");
    }
    const Eigen::MatrixXd a1t = A.top_block().transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a1t);
    const Eigen::MatrixXd lambda1 = lu.solve(Eigen::MatrixXd::Identity(n + 1, n + 1));
    const Eigen::MatrixXd lambda2 = lu.solve(-A.bottom_block().transpose());
    const double scale = A.entries.norm();
    const double r1 = (a1t * lambda1 - Eigen::MatrixXd::Identity(n + 1, n + 1)).norm();
    const double r2 = (a1t * lambda2 + A.bottom_block().transpose()).norm();
    if (!(r1 <= 1e-10 * scale && r2 <= 1e-10 * scale)) {
        throw Error(ErrorCode::SingularMatrix,
                    "solve_lambda: top block numerically singular (residual " +
                    std::to_string(std::max(r1, r2)) + ")");
    }
    return {lambda1, lambda2};
}

ElementaryTransform stage1_transform(int n, const Eigen::MatrixXd& lambda1,
                                     const Eigen::MatrixXd& lambda2) {
    const int dim = 2 * n + 1;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    // Component i <= n mixes all inputs through the stage-1 solves; the last
    // n components pass through untouched.
    m.topLeftCorner(n + 1, n + 1) = lambda1.transpose();
    m.bottomLeftCorner(n, n + 1) = lambda2.transpose();
    m.bottomRightCorner(n, n).setIdentity();
    return make_affine(TransformKind::TargetAffine, m, Eigen::VectorXd::Zero(dim), "H1");
}

LinearPart linear_part(const CenterConfig& p, const CoefficientMatrix& A,
                       const Eigen::MatrixXd& lambda1, const Eigen::MatrixXd& lambda2,
                       double selfcheck_tol) {
    const int n = A.n;
    const PolyMap g = build_gds(p, A);
    const ElementaryTransform h1 = stage1_transform(n, lambda1, lambda2);
    LinearPart out = read_linear_part(apply_target(h1, g));

    // Closed forms, recomputed independently of the composition path.
    Eigen::MatrixXd b_closed(2 * n + 1, n + 1);
    Eigen::VectorXd c_closed(2 * n + 1);
    Eigen::VectorXd g_const(2 * n + 1);
    for (int i = 0; i <= 2 * n; ++i) {
        double acc = 0.0;
        for (int j = 0; j <= n; ++j) acc += A.entries(i, j) * p.points(i, j) * p.points(i, j);
        g_const(i) = acc;
    }
    for (int i = 0; i <= 2 * n; ++i) {
        const bool top = i <= n;
        for (int j = 0; j <= n; ++j) {
            double acc = 0.0;
            for (int kk = 0; kk <= n; ++kk) {
                const double lam = top ? lambda1(kk, i) : lambda2(kk, i - n - 1);
                acc += lam * A.entries(kk, j) * p.points(kk, j);
            }
            if (!top) acc += A.entries(i, j) * p.points(i, j);
            b_closed(i, j) = -2.0 * acc;
        }
        double cc = top ? 0.0 : g_const(i);
        for (int kk = 0; kk <= n; ++kk) {
            const double lam = top ? lambda1(kk, i) : lambda2(kk, i - n - 1);
            cc += lam * g_const(kk);
        }
        c_closed(i) = cc;
    }
    const double scale = 1.0 + std::max(out.b.cwiseAbs().maxCoeff(),
                                        out.c.cwiseAbs().maxCoeff());
    out.selfcheck_error = std::max((out.b - b_closed).cwiseAbs().maxCoeff(),
                                   (out.c - c_closed).cwiseAbs().maxCoeff()) / scale;
    if (out.selfcheck_error > selfcheck_tol) {
        throw Error(ErrorCode::SelfCheckFailure,
                    "linear_part: readout disagrees with closed forms by " +
                    std::to_string(out.selfcheck_error));
    }
    return out;
}

BadSetCertificate badset_certificate(const CenterConfig& p, const CoefficientMatrix& A,
                                     Branch branch, const ToleranceConfig& tol) {
    if (branch == Branch::FullRank) {
        const PivotPlan plan = select_pivot(A, Branch::FullRank, tol.rank_tol);
        const CoefficientMatrix ap = permuted_matrix(A, plan);
        const CenterConfig pp = permuted_centers(p, plan);
        const auto [l1, l2] = solve_lambda(ap);
        const LinearPart lin = linear_part(pp, ap, l1, l2, tol.selfcheck_tol);
        return full_rank_certificate(lin.b, A.n, tol.det_tol);
    }
    const PivotPlan plan = select_pivot(A, Branch::Deficient, tol.rank_tol);
    const CoefficientMatrix ap = permuted_matrix(A, plan);
    const CenterConfig pp = permuted_centers(p, plan);
    const int r = plan.rank;
    const Eigen::MatrixXd alpha = solve_alpha(ap, r);
    const ElementaryTransform h1 = [&] {
        const int dim = ap.k + 1;
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
        m.bottomLeftCorner(dim - r, r) = alpha.transpose();
        return make_affine(TransformKind::TargetAffine, m, Eigen::VectorXd::Zero(dim), "H1");
    }();
    const LinearPart lin = read_linear_part(apply_target(h1, build_gds(pp, ap)));
    return deficient_certificate(lin.b.bottomRows(ap.k + 1 - r), tol.det_tol);
}

GammaSolution solve_gamma(const Eigen::MatrixXd& b, int n, const ToleranceConfig& tol) {
    if (b.rows() != 2 * n + 1 || b.cols() != n + 1) {
        throw Error(ErrorCode::DimensionMismatch, "solve_gamma: b must be (2n+1)x(n+1)");
    }
    const Eigen::MatrixXd bottom = b.bottomRows(n); // columns are the b_l vectors
    const double b_scale = 1.0 + bottom.cwiseAbs().maxCoeff();

    GammaSolution out;
    out.gamma = Eigen::MatrixXd::Zero(n, 2 * n + 1);
    out.d_diag.resize(n + 1);
    out.d_aff_x0.resize(n);
    out.d_aff_xj.resize(n);

    // Outputs 0..n: solve the square system that cancels every off-diagonal
    // linear term of component j.
    for (int j = 0; j <= n; ++j) {
        const Eigen::MatrixXd minor = minor_without_column(bottom, j);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(minor.transpose());
        if (!lu.isInvertible()) {
            BadSetCertificate cert = full_rank_certificate(b, n, tol.det_tol);
            throw BadSetError(cert, "solve_gamma: singular minor for output " +
                              std::to_string(j));
        }
        Eigen::VectorXd rhs(n);
        int idx = 0;
        for (int l = 0; l <= n; ++l) {
            if (l == j) continue;
            rhs(idx++) = -b(j, l);
        }
        const Eigen::VectorXd g = lu.solve(rhs);
        out.gamma.col(j) = g;
        out.d_diag(j) = b(j, j) + bottom.col(j).dot(g);
    }

    // Outputs n+1..2n: one-dimensional kernels of the deleted-column blocks,
    // unit norm, sign fixed so the x0 coefficient comes out positive.
    for (int j = 1; j <= n; ++j) {
        Eigen::VectorXd g(n);
        if (n == 1) {
            g(0) = 1.0;
        } else {
            Eigen::MatrixXd tilde(n, n - 1); // columns b_1.., without b_j
            int col = 0;
            for (int l = 1; l <= n; ++l) {
                if (l == j) continue;
                tilde.col(col++) = bottom.col(l);
            }
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(tilde.transpose(),
                                                  Eigen::ComputeFullV);
            const auto& sv = svd.singularValues();
            if (sv(0) == 0.0 || sv(n - 2) <= tol.rank_tol * sv(0)) {
                throw Error(ErrorCode::DegenerateKernel,
                            "solve_gamma: kernel for output " + std::to_string(n + j) +
                            " is not one-dimensional");
            }
            g = svd.matrixV().col(n - 1);
        }
        double d0 = bottom.col(0).dot(g);
        if (d0 < 0.0) {
            g = -g;
            d0 = -d0;
        }
        const double dj = bottom.col(j).dot(g);
        if (std::abs(d0) <= 1e-10 * b_scale || std::abs(dj) <= 1e-10 * b_scale) {
            BadSetCertificate cert = full_rank_certificate(b, n, tol.det_tol);
            throw BadSetError(cert, "solve_gamma: vanishing affine coefficient for output " +
                              std::to_string(n + j));
        }
        out.gamma.col(n + j) = g;
        out.d_aff_x0(j - 1) = d0;
        out.d_aff_xj(j - 1) = dj;
    }
    return out;
}

ReductionResult reduce_full_rank(const CenterConfig& p, const CoefficientMatrix& A,
                                 const ToleranceConfig& tol) {
    const int n = A.n;
    if (A.k != 2 * n) {
        throw Error(ErrorCode::RankMismatch, "reduce_full_rank: requires k = 2n");
    }
    const int n_vars = n + 1;
    const int dim = 2 * n + 1;
    const PolyMap g = build_gds(p, A);

    ReductionResult res;
    res.kind = NormalFormKind::WhitneyUmbrella;
    res.reduced = g;
    res.trace.snapshots.emplace_back("G", g);

    auto push_target = [&](ElementaryTransform t) {
        res.reduced = apply_target(t, res.reduced);
        res.trace.snapshots.emplace_back(t.label, res.reduced);
        res.target_chain.push_back(std::move(t));
    };
    auto push_source = [&](ElementaryTransform t) {
        res.reduced = apply_source(res.reduced, t);
        res.trace.snapshots.emplace_back(t.label, res.reduced);
        res.source_chain.push_back(std::move(t));
    };

    // Stage 0: permutations exposing a nonsingular top block.
    FullRankStage1 s1 = full_rank_stage1(p, A, tol);
    res.trace.row_order = s1.plan.row_order;
    res.trace.col_order = s1.plan.col_order;
    res.trace.column_permutation_used = s1.plan.column_permutation_used;
    if (s1.plan.row_permutation_used) push_target(s1.plan.target_perm);
    if (s1.plan.column_permutation_used) push_source(s1.plan.source_perm);

    // Stage 1: eliminate quadratic terms everywhere except the pure squares.
    push_target(s1.h1);
    res.trace.lambda1 = s1.lambda1;
    res.trace.lambda2 = s1.lambda2;
    res.trace.b = s1.lin.b;
    res.trace.c = s1.lin.c;
    const double map_scale = 1.0 + res.reduced.max_abs_coefficient();

    // Stage 2: drop constant terms.
    push_target(make_translation(TransformKind::TargetAffine, -s1.lin.c, "H2"));
    {
        const Exponents zero(n_vars, 0);
        for (int i = 0; i < dim; ++i) {
            assert_shape(std::abs(res.reduced.coefficient(i, zero)), map_scale,
                         tol.selfcheck_tol, "stage 2");
        }
    }

    // Stage 3: certificate, then the mixing transform that shrinks every
    // component to its promised two-term shape.
    res.certificate = full_rank_certificate(s1.lin.b, n, tol.det_tol);
    if (!res.certificate.all_outside) {
        throw BadSetError(res.certificate,
                          "center configuration lies on the exceptional set");
    }
    GammaSolution gamma = solve_gamma(s1.lin.b, n, tol);
    {
        Eigen::MatrixXd m3 = Eigen::MatrixXd::Zero(dim, dim);
        m3.topLeftCorner(n + 1, n + 1).setIdentity();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < dim; ++j) m3(n + 1 + i, j) = gamma.gamma(i, j);
        }
        // Row convention above; components are built from the transpose.
        push_target(make_affine(TransformKind::TargetAffine, m3.transpose(),
                                Eigen::VectorXd::Zero(dim), "H3"));
    }
    res.trace.gamma = gamma.gamma;
    res.trace.d_diag.resize(n + 1);
    res.trace.d_aff_x0.resize(n);
    res.trace.d_aff_xj.resize(n);
    for (int j = 0; j <= n; ++j) {
        std::vector<Exponents> allowed{Exponents(n_vars, 0), unit_exp(n_vars, j),
                                       unit_exp(n_vars, j, 2)};
        assert_shape(off_pattern(res.reduced, j, allowed), map_scale, tol.selfcheck_tol,
                     "stage 3 (squares)");
        res.trace.d_diag(j) = res.reduced.coefficient(j, unit_exp(n_vars, j));
        if (std::abs(res.trace.d_diag(j) - gamma.d_diag(j)) > tol.selfcheck_tol * map_scale) {
            throw Error(ErrorCode::SelfCheckFailure, "stage 3: d readout mismatch");
        }
    }
    for (int j = 1; j <= n; ++j) {
        std::vector<Exponents> allowed{unit_exp(n_vars, 0), unit_exp(n_vars, j)};
        assert_shape(off_pattern(res.reduced, n + j, allowed), map_scale,
                     tol.selfcheck_tol, "stage 3 (affine)");
        res.trace.d_aff_x0(j - 1) = res.reduced.coefficient(n + j, unit_exp(n_vars, 0));
        res.trace.d_aff_xj(j - 1) = res.reduced.coefficient(n + j, unit_exp(n_vars, j));
        if (std::abs(res.trace.d_aff_x0(j - 1) - gamma.d_aff_x0(j - 1)) >
                tol.selfcheck_tol * map_scale ||
            std::abs(res.trace.d_aff_xj(j - 1) - gamma.d_aff_xj(j - 1)) >
                tol.selfcheck_tol * map_scale) {
            throw Error(ErrorCode::SelfCheckFailure, "stage 3: affine d readout mismatch");
        }
    }

    // Stage 4: complete the square by a source translation.
    push_source(make_translation(TransformKind::SourceAffine,
                                 -0.5 * res.trace.d_diag, "h1"));

    // Stage 5: drop the constants that completing the square left behind.
    res.trace.d_tilde.resize(dim);
    {
        const Exponents zero(n_vars, 0);
        for (int i = 0; i < dim; ++i) {
            res.trace.d_tilde(i) = res.reduced.coefficient(i, zero);
        }
    }
    push_target(make_translation(TransformKind::TargetAffine, -res.trace.d_tilde, "H4"));

    // Stage 6: source mix sending the affine pairs to plain coordinates.
    {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_vars, n_vars);
        m(0, 0) = 1.0;
        for (int j = 1; j <= n; ++j) {
            m(j, j) = 1.0 / res.trace.d_aff_xj(j - 1);
            m(j, 0) = -res.trace.d_aff_x0(j - 1) / res.trace.d_aff_xj(j - 1);
        }
        push_source(make_affine(TransformKind::SourceAffine, m,
                                Eigen::VectorXd::Zero(n_vars), "h2"));
    }

    // Stage 7: triangular shear producing the mixed quadratic terms.
    {
        std::vector<std::vector<Term>> fwd(dim), inv(dim);
        fwd[0].push_back({unit_exp(dim, 0), 1.0});
        inv[0].push_back({unit_exp(dim, 0), 1.0});
        for (int i = 1; i <= n; ++i) {
            fwd[n + i].push_back({unit_exp(dim, n + i), 1.0});
            inv[n + i].push_back({unit_exp(dim, n + i), 1.0});
            const double d0 = res.trace.d_aff_x0(i - 1);
            const double dj = res.trace.d_aff_xj(i - 1);
            const double a = -dj * dj / (2.0 * d0);
            fwd[i].push_back({unit_exp(dim, i), a});
            fwd[i].push_back({unit_exp(dim, 0), d0 / 2.0});
            fwd[i].push_back({unit_exp(dim, n + i, 2), 1.0 / (2.0 * d0)});
            inv[i].push_back({unit_exp(dim, i), 1.0 / a});
            inv[i].push_back({unit_exp(dim, 0), d0 * d0 / (dj * dj)});
            inv[i].push_back({unit_exp(dim, n + i, 2), 1.0 / (dj * dj)});
        }
        push_target(make_shear(PolyMap(dim, std::move(fwd)), PolyMap(dim, std::move(inv)),
                               "H5"));
    }

    const PolyMap nf = whitney_umbrella_normal_form(n);
    res.residual = res.reduced.coefficient_distance(nf) / g.max_abs_coefficient();
    return res;
}

Eigen::MatrixXd solve_alpha(const CoefficientMatrix& A, int rank) {
    const int rows = A.k + 1;
    if (rank < 1 || rank > A.n + 1 || rank > rows) {
        throw Error(ErrorCode::RankMismatch, "solve_alpha: rank out of range");
    }
    const Eigen::MatrixXd top = A.entries.topRows(rank); // spanning rows
    Eigen::MatrixXd alpha(rank, rows - rank);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(top.transpose(),
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double scale = A.entries.norm();
    for (int i = rank; i < rows; ++i) {
        const Eigen::VectorXd rhs = -A.entries.row(i).transpose();
        const Eigen::VectorXd a = svd.solve(rhs);
        const double residual = (top.transpose() * a - rhs).norm();
        if (residual > 1e-10 * scale) {
            throw Error(ErrorCode::RankMismatch,
                        "solve_alpha: row " + std::to_string(i) +
                        " is not spanned (residual " + std::to_string(residual) + ")");
        }
        alpha.col(i - rank) = a;
    }
    return alpha;
}

ReductionResult reduce_to_inclusion(const CenterConfig& p, const CoefficientMatrix& A,
                                    const ToleranceConfig& tol) {
    const int n = A.n;
    const int k = A.k;
    if (k < 2 * n) {
        throw Error(ErrorCode::RankMismatch, "reduce_to_inclusion: requires k >= 2n");
    }
    const int rank = numerical_rank(A.entries, tol.rank_tol);
    if (k == 2 * n && rank == n + 1) {
        throw Error(ErrorCode::WrongBranch,
                    "rank(A) = n+1 at k = 2n belongs to the full-rank branch");
    }
    if (k + 1 - rank < n + 1) {
        throw Error(ErrorCode::RankMismatch,
                    "reduce_to_inclusion: not enough dependent rows (k+1-rank < n+1)");
    }
    const int n_vars = n + 1;
    const int dim = k + 1;
    const PolyMap g = build_gds(p, A);

    ReductionResult res;
    res.kind = NormalFormKind::Inclusion;
    res.reduced = g;
    res.trace.snapshots.emplace_back("G", g);

    auto push_target = [&](ElementaryTransform t) {
        res.reduced = apply_target(t, res.reduced);
        res.trace.snapshots.emplace_back(t.label, res.reduced);
        res.target_chain.push_back(std::move(t));
    };
    auto push_source = [&](ElementaryTransform t) {
        res.reduced = apply_source(res.reduced, t);
        res.trace.snapshots.emplace_back(t.label, res.reduced);
        res.source_chain.push_back(std::move(t));
    };

    const PivotPlan plan = select_pivot(A, Branch::Deficient, tol.rank_tol);
    const int r = plan.rank;
    const CoefficientMatrix ap = permuted_matrix(A, plan);
    const CenterConfig pp = permuted_centers(p, plan);
    res.trace.row_order = plan.row_order;
    res.trace.col_order = plan.col_order;
    res.trace.column_permutation_used = plan.column_permutation_used;
    if (plan.row_permutation_used) push_target(plan.target_perm);
    if (plan.column_permutation_used) push_source(plan.source_perm);

    // Stage 1: every dependent row loses its quadratic part.
    const Eigen::MatrixXd alpha = solve_alpha(ap, r);
    res.trace.alpha = alpha;
    {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
        m.bottomLeftCorner(dim - r, r) = alpha.transpose();
        push_target(make_affine(TransformKind::TargetAffine, m,
                                Eigen::VectorXd::Zero(dim), "H1"));
    }
    const LinearPart lin = read_linear_part(res.reduced);
    res.trace.b = lin.b;
    res.trace.c = lin.c;
    const double map_scale = 1.0 + res.reduced.max_abs_coefficient();
    for (int i = r; i < dim; ++i) {
        std::vector<Exponents> allowed;
        allowed.push_back(Exponents(n_vars, 0));
        for (int j = 0; j < n_vars; ++j) allowed.push_back(unit_exp(n_vars, j));
        assert_shape(off_pattern(res.reduced, i, allowed), map_scale, tol.selfcheck_tol,
                     "stage 1 (deficient)");
    }

    // Stage 2: drop the constants of the linearized components.
    {
        Eigen::VectorXd shift = Eigen::VectorXd::Zero(dim);
        shift.tail(dim - r) = -lin.c.tail(dim - r);
        push_target(make_translation(TransformKind::TargetAffine, shift, "H2"));
    }

    // Stage 3: certificate on the affine block, then the solve that turns
    // n+1 of the linearized components into plain coordinates and zeroes the
    // surplus ones.
    const Eigen::MatrixXd B = lin.b.bottomRows(dim - r);
    res.trace.B = B;
    res.certificate = deficient_certificate(B, tol.det_tol);
    if (!res.certificate.all_outside) {
        throw BadSetError(res.certificate,
                          "center configuration lies on the exceptional set");
    }
    {
        const int m_lin = dim - r;
        Eigen::MatrixXd w(m_lin, m_lin);
        if (m_lin == n + 1) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
            if (!lu.isInvertible()) {
                throw BadSetError(res.certificate, "affine block numerically singular");
            }
            w = lu.inverse();
        } else {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeFullU |
                                                         Eigen::ComputeThinV);
            const auto& sv = svd.singularValues();
            if (sv(n) <= tol.rank_tol * sv(0)) {
                throw BadSetError(res.certificate, "affine block rank-deficient");
            }
            const Eigen::MatrixXd pinv = svd.matrixV() *
                                         sv.head(n + 1).cwiseInverse().asDiagonal() *
                                         svd.matrixU().leftCols(n + 1).transpose();
            w.topRows(n + 1) = pinv;
            w.bottomRows(m_lin - n - 1) =
                svd.matrixU().rightCols(m_lin - n - 1).transpose();
        }
        Eigen::MatrixXd full = Eigen::MatrixXd::Identity(dim, dim);
        full.bottomRightCorner(m_lin, m_lin) = w;
        push_target(make_affine(TransformKind::TargetAffine, full,
                                Eigen::VectorXd::Zero(dim), "H3"));
    }
    for (int i = 0; i <= n; ++i) {
        std::vector<Exponents> allowed{unit_exp(n_vars, i)};
        assert_shape(off_pattern(res.reduced, r + i, allowed), map_scale,
                     tol.selfcheck_tol, "stage 3 (coordinates)");
        if (std::abs(res.reduced.coefficient(r + i, unit_exp(n_vars, i)) - 1.0) >
            tol.selfcheck_tol * map_scale) {
            throw Error(ErrorCode::SelfCheckFailure, "stage 3: coordinate not unit");
        }
    }
    for (int i = r + n + 1; i < dim; ++i) {
        assert_shape(off_pattern(res.reduced, i, {}), map_scale, tol.selfcheck_tol,
                     "stage 3 (zeroed components)");
    }

    // Stage 4: drop the constants still sitting on the quadratic components.
    {
        Eigen::VectorXd shift = Eigen::VectorXd::Zero(dim);
        const Exponents zero(n_vars, 0);
        for (int i = 0; i < r; ++i) shift(i) = -res.reduced.coefficient(i, zero);
        res.trace.d_tilde = -shift;
        push_target(make_translation(TransformKind::TargetAffine, shift, "H4"));
    }

    // Stage 5: cancel the quadratic components against the recovered
    // coordinates, then rotate everything into place.
    {
        std::vector<std::vector<Term>> fwd(dim), inv(dim);
        for (int i = 0; i < dim; ++i) {
            fwd[i].push_back({unit_exp(dim, i), 1.0});
            inv[i].push_back({unit_exp(dim, i), 1.0});
        }
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j <= n; ++j) {
                const double a = ap.entries(i, j);
                const double pij = pp.points(i, j);
                fwd[i].push_back({unit_exp(dim, r + j, 2), -a});
                inv[i].push_back({unit_exp(dim, r + j, 2), a});
                if (pij != 0.0) {
                    fwd[i].push_back({unit_exp(dim, r + j), 2.0 * a * pij});
                    inv[i].push_back({unit_exp(dim, r + j), -2.0 * a * pij});
                }
            }
        }
        push_target(make_shear(PolyMap(dim, std::move(fwd)), PolyMap(dim, std::move(inv)),
                               "H5_shear"));
        for (int i = 0; i < r; ++i) {
            assert_shape(off_pattern(res.reduced, i, {}), map_scale, tol.selfcheck_tol,
                         "stage 5 (cancelled quadratics)");
        }
        std::vector<int> order;
        for (int i = 0; i <= n; ++i) order.push_back(r + i);
        for (int i = 0; i < r; ++i) order.push_back(i);
        for (int i = r + n + 1; i < dim; ++i) order.push_back(i);
        push_target(make_permutation(TransformKind::TargetAffine, order, "H5_perm"));
    }

    const PolyMap nf = inclusion_normal_form(n, k);
    res.residual = res.reduced.coefficient_distance(nf) / g.max_abs_coefficient();
    return res;
}

Classification classify(const CenterConfig& p, const CoefficientMatrix& A,
                        const ToleranceConfig& tol) {
    const MatrixValidation v = validate_matrix(A);
    if (!v.ok) {
        std::string all;
        for (const auto& m : v.violations) all += (all.empty() ? "" : "; ") + m;
        throw Error(ErrorCode::InvalidArgument, all);
    }
    Classification out;
    const int rank = numerical_rank(A.entries, tol.rank_tol);
    try {
        if (A.k == 2 * A.n && rank == A.n + 1) {
            out.result = reduce_full_rank(p, A, tol);
        } else {
            out.result = reduce_to_inclusion(p, A, tol);
        }
        out.kind = out.result->kind;
        out.certificate = out.result->certificate;
    } catch (const BadSetError& err) {
        out.bad_set = true;
        out.certificate = err.certificate();
    }
    return out;
}

} // namespace gds
