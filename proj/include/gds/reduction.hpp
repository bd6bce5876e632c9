#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gds/instance.hpp"
#include "gds/polymap.hpp"
#include "gds/transform.hpp"

namespace gds {

struct ToleranceConfig {
    double rank_tol = 1e-10;      // numerical rank of A, kernel dimensions
    double det_tol = 1e-9;        // certificate determinants, relative to Hadamard bound
    double coef_tol = 1e-9;       // normal-form residual, relative
    double selfcheck_tol = 1e-10; // readout vs closed-form cross-checks
};

struct CertificateEntry {
    std::string label;
    double determinant = 0.0;
    double scale = 0.0;    // Hadamard bound of the tested minor
    bool outside = false;  // |det| > det_tol * scale
    bool warning = false;  // verdict within a factor 10 of the threshold
};

/// Determinant certificate that the center configuration avoids the
/// exceptional set of the chosen branch.
struct BadSetCertificate {
    Branch branch = Branch::FullRank;
    std::vector<CertificateEntry> entries;
    double det_tol = 0.0;
    bool all_outside = true;
    bool any_warning = false;
};

class BadSetError : public Error {
public:
    BadSetError(BadSetCertificate certificate, const std::string& message)
        : Error(ErrorCode::BadSet, message), certificate_(std::move(certificate)) {}

    const BadSetCertificate& certificate() const { return certificate_; }

private:
    BadSetCertificate certificate_;
};

/// Everything the pipeline computed along the way, kept for reporting and
/// for asserting the intermediate shapes each stage promises.
struct ReductionTrace {
    Eigen::MatrixXd lambda1; // (n+1) x (n+1), full-rank stage 1
    Eigen::MatrixXd lambda2; // (n+1) x n
    Eigen::MatrixXd b;       // (k+1) x (n+1) linear coefficients after stage 1
    Eigen::VectorXd c;       // (k+1) constant terms after stage 1
    Eigen::MatrixXd gamma;   // n x (2n+1): column j holds the stage-3 solve for output j
    Eigen::VectorXd d_diag;  // d_{j,j}, j = 0..n
    Eigen::VectorXd d_aff_x0; // d_{j,0}, j = n+1..2n
    Eigen::VectorXd d_aff_xj; // d_{j,j-n}, j = n+1..2n
    Eigen::VectorXd d_tilde; // constants removed after completing the square
    Eigen::MatrixXd alpha;   // deficient: rank x (k+1-rank) row-dependence solves
    Eigen::MatrixXd B;       // deficient: affine block, (k+1-rank) x (n+1)
    std::vector<int> row_order;
    std::vector<int> col_order;
    bool column_permutation_used = false;
    std::vector<std::pair<std::string, PolyMap>> snapshots;
};

enum class NormalFormKind { WhitneyUmbrella, Inclusion };

const char* normal_form_kind_name(NormalFormKind kind);

// The declared normal form: (x0^2, x0*x1, ..., x0*xn, x1, ..., xn) for the
// umbrella, (x0, ..., xn, 0, ..., 0) into k+1 components for the inclusion.
PolyMap whitney_umbrella_normal_form(int n);
PolyMap inclusion_normal_form(int n, int k);

struct ReductionResult {
    NormalFormKind kind = NormalFormKind::WhitneyUmbrella;
    std::vector<ElementaryTransform> source_chain;
    std::vector<ElementaryTransform> target_chain;
    ReductionTrace trace;
    BadSetCertificate certificate;
    PolyMap reduced;     // target_composite ∘ G ∘ source_composite
    double residual = 0; // max |coef| of (reduced - normal form), relative

    PolyMap normal_form() const;
    int n() const { return reduced.n_vars() - 1; }
    int k() const { return reduced.n_components() - 1; }
    // Source-side image of the origin; for the umbrella branch this is a
    // singular point of the original map.
    Eigen::VectorXd source_origin() const;
};

// Stage-1 solves for the full-rank branch: A1^T L1 = E and A1^T L2 = -A2^T,
// for the row-pivoted matrix. Throws SingularMatrix on a singular top block.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> solve_lambda(const CoefficientMatrix& A);

// The target mix built from the stage-1 solves.
ElementaryTransform stage1_transform(int n, const Eigen::MatrixXd& lambda1,
                                     const Eigen::MatrixXd& lambda2);

struct LinearPart {
    Eigen::MatrixXd b;
    Eigen::VectorXd c;
    double selfcheck_error = 0.0; // readout vs closed forms, relative
};

// Linear and constant data of the stage-1 composite, extracted by coefficient
// readout and cross-checked against the closed forms.
LinearPart linear_part(const CenterConfig& p, const CoefficientMatrix& A,
                       const Eigen::MatrixXd& lambda1, const Eigen::MatrixXd& lambda2,
                       double selfcheck_tol = 1e-10);

// Certificate for the given branch at (p, A); always returns, never throws on
// bad-set membership.
BadSetCertificate badset_certificate(const CenterConfig& p, const CoefficientMatrix& A,
                                     Branch branch, const ToleranceConfig& tol = {});

struct GammaSolution {
    Eigen::MatrixXd gamma;    // n x (2n+1)
    Eigen::VectorXd d_diag;   // n+1
    Eigen::VectorXd d_aff_x0; // n
    Eigen::VectorXd d_aff_xj; // n
};

// Stage-3 solves of the full-rank branch from the linear data b. Throws
// BadSet on a singular minor and DegenerateKernel when a kernel is not
// one-dimensional.
GammaSolution solve_gamma(const Eigen::MatrixXd& b, int n, const ToleranceConfig& tol = {});

// Full-rank branch: reduce to the Whitney umbrella normal form. Requires
// k = 2n and rank(A) = n+1; throws BadSet (with certificate) on exceptional p.
ReductionResult reduce_full_rank(const CenterConfig& p, const CoefficientMatrix& A,
                                 const ToleranceConfig& tol = {});

// Row-dependence coefficients for the deficient branch: for each row i >= r
// of the pivoted matrix, column i-r solves  sum_j alpha(j, i-r) row_j = -row_i
// over the first r rows (least squares against the spanning rows).
Eigen::MatrixXd solve_alpha(const CoefficientMatrix& A, int rank);

// Deficient branch: reduce to the inclusion. Requires k >= 2n and
// k + 1 - rank(A) >= n + 1; throws WrongBranch for k = 2n with full rank.
ReductionResult reduce_to_inclusion(const CenterConfig& p, const CoefficientMatrix& A,
                                    const ToleranceConfig& tol = {});

struct Classification {
    bool bad_set = false;
    NormalFormKind kind = NormalFormKind::WhitneyUmbrella; // valid when !bad_set
    BadSetCertificate certificate;
    std::optional<ReductionResult> result; // absent when bad_set
};

// Dispatch on rank(A) and k, running the matching branch.
Classification classify(const CenterConfig& p, const CoefficientMatrix& A,
                        const ToleranceConfig& tol = {});

} // namespace gds
