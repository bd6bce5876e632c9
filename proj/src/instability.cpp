#include "gds/instability.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "gds/verify.hpp"

namespace gds {

namespace {

void check_blocks(const Eigen::MatrixXd& q, const Eigen::MatrixXd& c,
                  const Eigen::MatrixXd& a1) {
    const int n = static_cast<int>(a1.rows()) - 1;
    if (a1.rows() != a1.cols() || n < 1) {
        throw Error(ErrorCode::DimensionMismatch, "top block must be square, n >= 1");
    }
    if (q.rows() != n + 1 || q.cols() != n + 1 || c.rows() != n || c.cols() != n + 1) {
        throw Error(ErrorCode::DimensionMismatch, "q must be (n+1)^2, c must be n x (n+1)");
    }
    const double cmax = c.cwiseAbs().maxCoeff();
    for (int i = 0; i < c.rows(); ++i) {
        for (int j = 0; j < c.cols(); ++j) {
            if (std::abs(c(i, j)) <= kZeroEntryTol * cmax) {
                throw Error(ErrorCode::ZeroEntry,
                            "zero entry in c at (" + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
            }
        }
    }
}

Eigen::MatrixXd solve_lambda2(const Eigen::MatrixXd& a1, const Eigen::MatrixXd& c) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a1.transpose());
    const Eigen::MatrixXd lambda2 = lu.solve(-c.transpose());
    const double residual = (a1.transpose() * lambda2 + c.transpose()).norm();
    if (!(residual <= 1e-8 * (1.0 + a1.norm() + c.norm()))) {
        throw Error(ErrorCode::SingularMatrix, "top block numerically singular");
    }
    return lambda2;
}

// Witness scale: how big the stage-1 composite's coefficients are; residual
// and flatness thresholds are relative to it.
double witness_scale(const PolyMap& phi1) {
    return 1.0 + phi1.max_abs_coefficient();
}

PolyMap stage1_composite(const CenterConfig& p, const CoefficientMatrix& tilde) {
    const auto [l1, l2] = solve_lambda(tilde);
    return apply_target(stage1_transform(tilde.n, l1, l2), build_gds(p, tilde));
}

// Max |b_ij| over the trailing components, read from the stage-1 composite.
double trailing_b_residual(const PolyMap& phi1, int n) {
    double worst = 0.0;
    for (int i = n + 1; i <= 2 * n; ++i) {
        for (int j = 0; j <= n; ++j) {
            Exponents e(n + 1, 0);
            e[j] = 1;
            worst = std::max(worst, std::abs(phi1.coefficient(i, e)));
        }
    }
    return worst;
}

} // namespace

CoefficientMatrix perturbed_matrix(const CoefficientMatrix& A, const Eigen::MatrixXd& c) {
    CoefficientMatrix tilde;
    tilde.n = A.n;
    tilde.k = A.k;
    tilde.entries = A.entries;
    tilde.entries.bottomRows(A.n) = c;
    return tilde;
}

Eigen::MatrixXd psi_map(const Eigen::MatrixXd& q, const Eigen::MatrixXd& c,
                        const Eigen::MatrixXd& a1) {
    check_blocks(q, c, a1);
    const int n = static_cast<int>(a1.rows()) - 1;
    const Eigen::MatrixXd lambda2 = solve_lambda2(a1, c);
    Eigen::MatrixXd p(2 * n + 1, n + 1);
    p.topRows(n + 1) = q;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= n; ++j) {
            double num = 0.0;
            for (int kk = 0; kk <= n; ++kk) num += lambda2(kk, i) * a1(kk, j) * q(kk, j);
            p(n + 1 + i, j) = -num / c(i, j);
        }
    }
    return p;
}

PsiJacobianDet psi_jacobian_det(const Eigen::MatrixXd& q, const Eigen::MatrixXd& c,
                                const Eigen::MatrixXd& a1, double step) {
    check_blocks(q, c, a1);
    const int n = static_cast<int>(a1.rows()) - 1;
    const int nq = (n + 1) * (n + 1);
    const int nc = n * (n + 1);
    const int total = nq + nc;

    auto unpack = [&](const Eigen::VectorXd& v) {
        Eigen::MatrixXd qq(n + 1, n + 1), cc(n, n + 1);
        for (int i = 0; i < n + 1; ++i)
            for (int j = 0; j < n + 1; ++j) qq(i, j) = v(i * (n + 1) + j);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n + 1; ++j) cc(i, j) = v(nq + i * (n + 1) + j);
        return std::make_pair(qq, cc);
    };
    auto pack_output = [&](const Eigen::MatrixXd& p) {
        Eigen::VectorXd out(total);
        for (int i = 0; i < 2 * n + 1; ++i)
            for (int j = 0; j < n + 1; ++j) out(i * (n + 1) + j) = p(i, j);
        return out;
    };

    Eigen::VectorXd x0(total);
    for (int i = 0; i < n + 1; ++i)
        for (int j = 0; j < n + 1; ++j) x0(i * (n + 1) + j) = q(i, j);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n + 1; ++j) x0(nq + i * (n + 1) + j) = c(i, j);

    Eigen::MatrixXd jac(total, total);
    for (int v = 0; v < total; ++v) {
        Eigen::VectorXd hi = x0, lo = x0;
        hi(v) += step;
        lo(v) -= step;
        const auto [qh, ch] = unpack(hi);
        const auto [ql, cl] = unpack(lo);
        jac.col(v) = (pack_output(psi_map(qh, ch, a1)) - pack_output(psi_map(ql, cl, a1))) /
                     (2.0 * step);
    }
    PsiJacobianDet out;
    out.finite_difference = jac.determinant();

    // Second route: the q-block of the output is the identity in q and does
    // not involve c, so the determinant reduces to det of the c-derivatives
    // of the trailing rows. Those split into one block per trailing row, each
    // computable in closed form from the solve against the top block.
    const Eigen::MatrixXd lambda2 = solve_lambda2(a1, c);
    Eigen::MatrixXd m_inv = a1.transpose().partialPivLu().solve(
        Eigen::MatrixXd::Identity(n + 1, n + 1));
    Eigen::MatrixXd w(n + 1, n + 1);
    for (int m = 0; m <= n; ++m) {
        for (int j = 0; j <= n; ++j) {
            double acc = 0.0;
            for (int kk = 0; kk <= n; ++kk) acc += m_inv(kk, m) * a1(kk, j) * q(kk, j);
            w(m, j) = acc;
        }
    }
    double block_det = 1.0;
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd block(n + 1, n + 1); // rows j, cols m
        for (int j = 0; j <= n; ++j) {
            double num = 0.0;
            for (int kk = 0; kk <= n; ++kk) num += lambda2(kk, i) * a1(kk, j) * q(kk, j);
            const double psi = -num / c(i, j);
            for (int m = 0; m <= n; ++m) {
                block(j, m) = w(m, j) / c(i, j) - (m == j ? psi / c(i, j) : 0.0);
            }
        }
        block_det *= block.determinant();
    }
    out.block = block_det;
    return out;
}

Eigen::MatrixXd build_instability_matrix(const CenterConfig& p, const CoefficientMatrix& A) {
    const int n = A.n;
    if (A.k != 2 * n) {
        throw Error(ErrorCode::DimensionMismatch, "instability matrix requires k = 2n");
    }
    const Eigen::MatrixXd a1 = A.top_block();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a1.transpose());
    {
        const Eigen::MatrixXd probe =
            lu.solve(Eigen::MatrixXd::Identity(n + 1, n + 1));
        if ((a1.transpose() * probe - Eigen::MatrixXd::Identity(n + 1, n + 1)).norm() >
            1e-8 * (1.0 + a1.norm())) {
            throw Error(ErrorCode::SingularMatrix, "top block numerically singular");
        }
    }
    // b_ij(p, c) = -2 ( sum_k lambda_{k,i}(c) a_kj p_kj + c_ij p_ij ) with
    // lambda(c) = -(A1^T)^{-1} c^T; linear and homogeneous in c. w(m, j) below
    // collects the p-weighted solve so that
    // b_ij = -2 ( -sum_m c_im w(m, j) + c_ij p_ij ).
    Eigen::MatrixXd w(n + 1, n + 1);
    const Eigen::MatrixXd m_inv = lu.solve(Eigen::MatrixXd::Identity(n + 1, n + 1));
    for (int m = 0; m <= n; ++m) {
        for (int j = 0; j <= n; ++j) {
            double acc = 0.0;
            for (int kk = 0; kk <= n; ++kk) {
                acc += m_inv(kk, m) * A.entries(kk, j) * p.points(kk, j);
            }
            w(m, j) = acc;
        }
    }
    const int nc = n * (n + 1);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nc, nc);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= n; ++j) {
            const int row = i * (n + 1) + j;
            for (int m = 0; m <= n; ++m) {
                const int col = i * (n + 1) + m;
                L(row, col) += 2.0 * w(m, j);
            }
            L(row, i * (n + 1) + j) += -2.0 * p.points(n + 1 + i, j);
        }
    }
    return L;
}

PerturbationSearch find_unstable_perturbation(const CenterConfig& p,
                                              const CoefficientMatrix& A,
                                              const ToleranceConfig&,
                                              const SampleSpec& spec) {
    const int n = A.n;
    const Eigen::MatrixXd L = build_instability_matrix(p, A);
    const int nc = n * (n + 1);

    PerturbationSearch out;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(L, Eigen::ComputeFullV);
    out.singular_values = svd.singularValues();
    out.smallest_singular_value = out.singular_values(nc - 1);
    const double sv_scale = out.singular_values(0);
    int kernel_dim = 0;
    for (int i = 0; i < nc; ++i) {
        if (out.singular_values(i) <= 1e-9 * sv_scale) ++kernel_dim;
    }
    out.kernel_dimension = kernel_dim;
    if (kernel_dim == 0) return out;

    const Eigen::MatrixXd kernel = svd.matrixV().rightCols(kernel_dim);
    Eigen::VectorXd best = kernel.col(0);
    double best_ratio = 0.0;
    auto ratio_of = [](const Eigen::VectorXd& v) {
        const double max_e = v.cwiseAbs().maxCoeff();
        return max_e > 0.0 ? v.cwiseAbs().minCoeff() / max_e : 0.0;
    };
    if (kernel_dim == 1) {
        best_ratio = ratio_of(best);
    } else {
        // Deterministic grid over the kernel's unit sphere.
        const int steps_per_axis = kernel_dim == 2 ? 360 : 24;
        std::vector<int> idx(kernel_dim - 1, 0);
        const double pi = std::acos(-1.0);
        bool done = false;
        while (!done) {
            Eigen::VectorXd weights(kernel_dim);
            double sin_prod = 1.0;
            for (int a = 0; a < kernel_dim - 1; ++a) {
                const double angle = pi * idx[a] / steps_per_axis;
                weights(a) = sin_prod * std::cos(angle);
                sin_prod *= std::sin(angle);
            }
            weights(kernel_dim - 1) = sin_prod;
            const Eigen::VectorXd cand = kernel * weights;
            const double r = ratio_of(cand);
            if (r > best_ratio) {
                best_ratio = r;
                best = cand;
            }
            int a = 0;
            for (; a < kernel_dim - 1; ++a) {
                if (++idx[a] < steps_per_axis) break;
                idx[a] = 0;
            }
            done = a == kernel_dim - 1;
        }
    }
    out.min_entry_ratio = best_ratio;
    if (best_ratio <= 1e-6) return out; // kernel exists but hugs a coordinate plane

    // Scale to match the block being replaced; sign follows its dominant entry.
    const Eigen::MatrixXd a2 = A.bottom_block();
    best *= a2.norm() / best.norm();
    int max_r = 0, max_c = 0;
    a2.cwiseAbs().maxCoeff(&max_r, &max_c);
    const double witness_entry = best(max_r * (n + 1) + max_c);
    if (witness_entry * a2(max_r, max_c) < 0.0) best = -best;

    Eigen::MatrixXd c(n, n + 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= n; ++j) c(i, j) = best(i * (n + 1) + j);

    InstabilityWitness w;
    w.q = p.points.topRows(n + 1);
    w.c = c;
    w.p = p.points;
    const CoefficientMatrix tilde = perturbed_matrix(A, c);
    const PolyMap phi1 = stage1_composite(p, tilde);
    w.b_residual = trailing_b_residual(phi1, n);
    w.flatness = check_image_flat(phi1, n, 1e-10).max_nonconstant_coef;
    const SingularPointReport sp = find_singular_point(phi1, spec);
    if (sp.found) {
        const PolyMap g = build_gds(p, tilde);
        Eigen::JacobiSVD<Eigen::MatrixXd> jsvd(g.jacobian_at(sp.point));
        w.singular_point = sp.point;
        w.singular_value = jsvd.singularValues().tail(1)(0);
        w.jacobian_scale = jsvd.singularValues()(0);
    }
    out.witness = w;
    out.found = true;
    return out;
}

WitnessCertification certify_witness(const InstabilityWitness& w, const CoefficientMatrix& A,
                                     const ToleranceConfig& tol, const SampleSpec& spec) {
    const int n = A.n;
    WitnessCertification cert;

    // (iv) first: the perturbed matrix must be admissible before anything
    // else is meaningful.
    const CoefficientMatrix tilde = perturbed_matrix(A, w.c);
    const MatrixValidation v = validate_matrix(tilde);
    cert.matrix_ok = v.ok;
    for (const std::string& msg : v.violations) cert.violations.push_back(msg);
    if (numerical_rank(tilde.entries, tol.rank_tol) != n + 1) {
        cert.matrix_ok = false;
        cert.violations.push_back("perturbed matrix rank below n+1");
    }
    if (!cert.matrix_ok) return cert;

    CenterConfig p{w.p};
    const PolyMap phi1 = stage1_composite(p, tilde);
    cert.scale = witness_scale(phi1);

    // (i) linear coefficients of the trailing components vanish.
    cert.b_residual = trailing_b_residual(phi1, n);
    cert.residual_ok = cert.b_residual <= 1e-10 * cert.scale;
    if (!cert.residual_ok) cert.violations.push_back("trailing linear coefficients survive");

    // (ii) trailing image flat at coefficient level.
    const FlatImageReport flat = check_image_flat(phi1, n, 1e-10);
    cert.flatness = flat.max_nonconstant_coef;
    cert.flat_ok = flat.flat;
    if (!cert.flat_ok) cert.violations.push_back("trailing image is not flat");

    // (iii) a singular point exists; search the flattened composite, then
    // measure the original map there.
    const SingularPointReport sp = find_singular_point(phi1, spec);
    if (sp.found) {
        const PolyMap g = build_gds(p, tilde);
        Eigen::JacobiSVD<Eigen::MatrixXd> jsvd(g.jacobian_at(sp.point));
        cert.singular_point = sp.point;
        cert.singular_value = jsvd.singularValues().tail(1)(0);
        cert.singular_ok = cert.singular_value <= 1e-8 * jsvd.singularValues()(0);
    }
    if (!cert.singular_ok) cert.violations.push_back("no singular point found");
    return cert;
}

} // namespace gds
