#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "gds/polymap.hpp"
#include "gds/transform.hpp"

namespace gds {

inline constexpr double kRankTol = 1e-10;    // relative, singular-value based
inline constexpr double kZeroEntryTol = 1e-12;

/// (k+1) x (n+1) coefficient matrix with nonzero entries. Row i weights the
/// quadric family of the i-th map component.
struct CoefficientMatrix {
    int k = 0;
    int n = 0;
    Eigen::MatrixXd entries; // (k+1) x (n+1)

    Eigen::MatrixXd top_block() const;    // rows 0..n (square)
    Eigen::MatrixXd bottom_block() const; // rows n+1..k
};

/// Center points p_0..p_k, one per component, stored as rows.
struct CenterConfig {
    Eigen::MatrixXd points; // (k+1) x (n+1)
};

struct ProblemInstance {
    int n = 0;
    int k = 0;
    CoefficientMatrix A;
    CenterConfig p;
};

struct MatrixValidation {
    bool ok = true;
    std::vector<std::string> violations;
};

enum class Branch { FullRank, Deficient };

/// Row/column reordering that exposes a well-conditioned leading minor, with
/// both permutations realized as recorded coordinate changes.
struct PivotPlan {
    int rank = 0;
    std::vector<int> row_order; // position i <- original row row_order[i]
    std::vector<int> col_order;
    ElementaryTransform target_perm;
    ElementaryTransform source_perm;
    bool row_permutation_used = false;
    bool column_permutation_used = false;
};

// Component i = sum_j a_ij (x_j - p_ij)^2, expanded to canonical sparse form.
PolyMap build_gds(const CenterConfig& p, const CoefficientMatrix& A);

// Reports zero entries and dimension defects; never throws.
MatrixValidation validate_matrix(const CoefficientMatrix& A);

// Numerical rank from singular values: count of sigma_i > tol * sigma_max.
int numerical_rank(const Eigen::MatrixXd& m, double tol = kRankTol);

// Chooses permutations making the leading rank x rank minor nonsingular.
// FullRank requires rank(A) = n+1 and permutes rows only; Deficient requires
// rank(A) <= n and may also permute columns (flagged in the plan). Throws
// RankMismatch when the requested branch contradicts rank(A).
PivotPlan select_pivot(const CoefficientMatrix& A, Branch branch,
                       double rank_tol = kRankTol);

// Permuted copies of A and p under a plan.
CoefficientMatrix permuted_matrix(const CoefficientMatrix& A, const PivotPlan& plan);
CenterConfig permuted_centers(const CenterConfig& p, const PivotPlan& plan);

// All-ones matrix (plain distance-squared family).
CoefficientMatrix distance_squared_matrix(int n, int k);
// First column -1, all other entries 1.
CoefficientMatrix lorentzian_matrix(int n, int k);

} // namespace gds
