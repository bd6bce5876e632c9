#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "gds/instance.hpp"
#include "gds/reduction.hpp"
#include "gds/verify.hpp"

namespace gds {

/// A certified unstable perturbation: a second coefficient block c with all
/// entries nonzero that kills every linear coefficient of the trailing
/// components at the center configuration p, together with the evidence that
/// the perturbed map is singular with a flat trailing image.
struct InstabilityWitness {
    Eigen::MatrixXd q; // (n+1) x (n+1) first-block centers
    Eigen::MatrixXd c; // n x (n+1) perturbed second block, nonzero entries
    Eigen::MatrixXd p; // (2n+1) x (n+1) full center configuration
    double b_residual = 0.0;
    double flatness = 0.0;
    Eigen::VectorXd singular_point;
    double singular_value = 0.0; // smallest singular value of JG at the point
    double jacobian_scale = 0.0; // largest singular value there
};

// Center configuration whose trailing linear coefficients vanish for the
// block pair (A1 | c): the first n+1 rows are q, row n+1+i carries
// (-sum_k lambda_{k,i} a_{kj} q_{kj}) / c_{ij}. Degree-0 homogeneous in c.
Eigen::MatrixXd psi_map(const Eigen::MatrixXd& q, const Eigen::MatrixXd& c,
                        const Eigen::MatrixXd& a1);

struct PsiJacobianDet {
    double finite_difference = 0.0; // det of the full finite-difference Jacobian
    double block = 0.0;             // det of the c-block, using the triangular structure
};

// Both determinant routes reported side by side; no zero/sign assumption is
// imposed on either.
PsiJacobianDet psi_jacobian_det(const Eigen::MatrixXd& q, const Eigen::MatrixXd& c,
                                const Eigen::MatrixXd& a1, double step = 1e-6);

// Matrix of the linear map c -> (b_ij(p, c)) on the trailing components,
// n(n+1) square, rows and columns in row-major (i, j) order.
Eigen::MatrixXd build_instability_matrix(const CenterConfig& p, const CoefficientMatrix& A);

struct PerturbationSearch {
    bool found = false;
    InstabilityWitness witness;          // valid when found
    Eigen::VectorXd singular_values;     // of the instability matrix
    double smallest_singular_value = 0.0;
    int kernel_dimension = 0;
    double min_entry_ratio = 0.0; // min |c| / max |c| of the best candidate
};

// Kernel search for an unstable perturbation at fixed p. A witness needs a
// kernel vector with every entry bounded away from zero; with a kernel of
// dimension > 1 a deterministic grid over its unit sphere picks the
// combination maximizing the smallest entry.
PerturbationSearch find_unstable_perturbation(const CenterConfig& p,
                                              const CoefficientMatrix& A,
                                              const ToleranceConfig& tol = {},
                                              const SampleSpec& spec = {});

struct WitnessCertification {
    bool residual_ok = false;
    bool flat_ok = false;
    bool singular_ok = false;
    bool matrix_ok = false; // perturbed matrix has rank n+1, nonzero entries
    double b_residual = 0.0;
    double flatness = 0.0;
    double singular_value = 0.0;
    double scale = 0.0;
    Eigen::VectorXd singular_point;
    std::vector<std::string> violations;

    bool all_ok() const { return residual_ok && flat_ok && singular_ok && matrix_ok; }
};

// Re-verifies a witness from scratch: coefficient-level residuals and flat
// image through the stage-1 composite, a singular point by line search, and
// the shape conditions on the perturbed matrix.
WitnessCertification certify_witness(const InstabilityWitness& w, const CoefficientMatrix& A,
                                     const ToleranceConfig& tol = {},
                                     const SampleSpec& spec = {});

// The perturbed matrix (A1 stacked over c).
CoefficientMatrix perturbed_matrix(const CoefficientMatrix& A, const Eigen::MatrixXd& c);

} // namespace gds
