#include "gds/instance.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gds/errors.hpp"

namespace gds {

namespace {

void check_pair(const CenterConfig& p, const CoefficientMatrix& A) {
    if (A.entries.rows() != A.k + 1 || A.entries.cols() != A.n + 1) {
        throw Error(ErrorCode::DimensionMismatch, "matrix storage does not match (k, n)");
    }
    if (p.points.rows() != A.entries.rows() || p.points.cols() != A.entries.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "center configuration does not match matrix dimensions");
    }
}

// Greedy elimination pivot search. When allow_columns is false the column
// order stays natural and only row pivots are chosen; ties break toward the
// lowest index.
struct GreedyPivots {
    std::vector<int> rows;
    std::vector<int> cols;
    bool complete = true;
};

GreedyPivots greedy_pivots(const Eigen::MatrixXd& a, int steps, bool allow_columns) {
    Eigen::MatrixXd work = a;
    const int n_rows = static_cast<int>(a.rows());
    const int n_cols = static_cast<int>(a.cols());
    std::vector<bool> row_used(n_rows, false), col_used(n_cols, false);
    GreedyPivots out;
    for (int s = 0; s < steps; ++s) {
        int best_r = -1, best_c = -1;
        double best = 0.0;
        for (int r = 0; r < n_rows; ++r) {
            if (row_used[r]) continue;
            if (allow_columns) {
                for (int c = 0; c < n_cols; ++c) {
                    if (col_used[c]) continue;
                    if (std::abs(work(r, c)) > best) {
                        best = std::abs(work(r, c));
                        best_r = r;
                        best_c = c;
                    }
                }
            } else {
                const int c = s;
                if (std::abs(work(r, c)) > best) {
                    best = std::abs(work(r, c));
                    best_r = r;
                    best_c = c;
                }
            }
        }
        if (best_r < 0) {
            out.complete = false;
            break;
        }
        out.rows.push_back(best_r);
        out.cols.push_back(best_c);
        row_used[best_r] = true;
        col_used[best_c] = true;
        const double piv = work(best_r, best_c);
        for (int r = 0; r < n_rows; ++r) {
            if (row_used[r]) continue;
            const double f = work(r, best_c) / piv;
            work.row(r) -= f * work.row(best_r);
        }
    }
    return out;
}

std::vector<int> complete_order(const std::vector<int>& picked, int total) {
    std::vector<int> order = picked;
    std::vector<bool> used(total, false);
    for (int i : picked) used[i] = true;
    for (int i = 0; i < total; ++i) {
        if (!used[i]) order.push_back(i);
    }
    return order;
}

bool is_identity_order(const std::vector<int>& order) {
    for (int i = 0; i < static_cast<int>(order.size()); ++i) {
        if (order[i] != i) return false;
    }
    return true;
}

// Smallest/largest singular-value test of the leading r x r minor after
// applying the candidate orders.
bool leading_minor_ok(const Eigen::MatrixXd& a, const std::vector<int>& row_order,
                      const std::vector<int>& col_order, int r, double rank_tol) {
    Eigen::MatrixXd minor(r, r);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) minor(i, j) = a(row_order[i], col_order[j]);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(minor);
    const double largest = svd.singularValues()(0);
    const double smallest = svd.singularValues()(r - 1);
    return largest > 0.0 && smallest > rank_tol * largest;
}

} // namespace

Eigen::MatrixXd CoefficientMatrix::top_block() const {
    return entries.topRows(n + 1);
}

Eigen::MatrixXd CoefficientMatrix::bottom_block() const {
    return entries.bottomRows(k - n);
}

PolyMap build_gds(const CenterConfig& p, const CoefficientMatrix& A) {
    check_pair(p, A);
    MatrixValidation v = validate_matrix(A);
    for (const std::string& msg : v.violations) {
        if (msg.find("zero entry") != std::string::npos) {
            throw Error(ErrorCode::ZeroEntry, msg);
        }
    }
    const int n_vars = A.n + 1;
    std::vector<std::vector<Term>> comps(A.k + 1);
    for (int i = 0; i <= A.k; ++i) {
        double constant = 0.0;
        for (int j = 0; j < n_vars; ++j) {
            const double a = A.entries(i, j);
            const double pij = p.points(i, j);
            Exponents sq(n_vars, 0);
            sq[j] = 2;
            comps[i].push_back({sq, a});
            if (pij != 0.0) {
                Exponents lin(n_vars, 0);
                lin[j] = 1;
                comps[i].push_back({lin, -2.0 * a * pij});
                constant += a * pij * pij;
            }
        }
        if (constant != 0.0) comps[i].push_back({Exponents(n_vars, 0), constant});
    }
    return PolyMap(n_vars, std::move(comps));
}

MatrixValidation validate_matrix(const CoefficientMatrix& A) {
    MatrixValidation out;
    auto fail = [&out](std::string msg) {
        out.ok = false;
        out.violations.push_back(std::move(msg));
    };
    if (A.k < 1 || A.n < 1) fail("dimension defect: need k >= 1 and n >= 1");
    if (A.entries.rows() != A.k + 1 || A.entries.cols() != A.n + 1) {
        fail("dimension defect: storage is " + std::to_string(A.entries.rows()) + "x" +
             std::to_string(A.entries.cols()) + ", expected " + std::to_string(A.k + 1) +
             "x" + std::to_string(A.n + 1));
        return out;
    }
    if (A.k < 2 * A.n) {
        fail("dimension defect: k = " + std::to_string(A.k) + " < 2n = " +
             std::to_string(2 * A.n) + " required by the reduction pipelines");
    }
    const double max_abs = A.entries.cwiseAbs().maxCoeff();
    for (int i = 0; i < A.entries.rows(); ++i) {
        for (int j = 0; j < A.entries.cols(); ++j) {
            if (std::abs(A.entries(i, j)) <= kZeroEntryTol * max_abs) {
                fail("zero entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }
    return out;
}

int numerical_rank(const Eigen::MatrixXd& m, double tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    int r = 0;
    for (int i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol * sv(0)) ++r;
    }
    return r;
}

PivotPlan select_pivot(const CoefficientMatrix& A, Branch branch, double rank_tol) {
    const int rows = A.k + 1;
    const int cols = A.n + 1;
    const int rank = numerical_rank(A.entries, rank_tol);
    if (branch == Branch::FullRank && rank != A.n + 1) {
        throw Error(ErrorCode::RankMismatch,
                    "full-rank branch requested but rank(A) = " + std::to_string(rank));
    }
    if (branch == Branch::Deficient && A.k == 2 * A.n && rank > A.n) {
        throw Error(ErrorCode::RankMismatch,
                    "deficient branch requested but rank(A) = n+1 at k = 2n");
    }
    const int r = rank;

    std::vector<int> id_rows(rows), id_cols(cols);
    std::iota(id_rows.begin(), id_rows.end(), 0);
    std::iota(id_cols.begin(), id_cols.end(), 0);

    std::vector<int> row_order, col_order;
    if (leading_minor_ok(A.entries, id_rows, id_cols, r, rank_tol)) {
        row_order = id_rows;
        col_order = id_cols;
    } else {
        GreedyPivots rows_only = greedy_pivots(A.entries, r, /*allow_columns=*/false);
        if (rows_only.complete) {
            std::vector<int> cand_rows = complete_order(rows_only.rows, rows);
            if (leading_minor_ok(A.entries, cand_rows, id_cols, r, rank_tol)) {
                row_order = cand_rows;
                col_order = id_cols;
            }
        }
        if (row_order.empty()) {
            if (branch == Branch::FullRank) {
                // Rows alone must suffice when rank(A) = n+1; reaching this
                // point means the numerical rank test disagrees.
                throw Error(ErrorCode::RankMismatch,
                            "full-rank pivot search failed singular-value validation");
            }
            GreedyPivots full = greedy_pivots(A.entries, r, /*allow_columns=*/true);
            if (!full.complete) {
                throw Error(ErrorCode::RankMismatch, "pivot search exhausted before rank");
            }
            row_order = complete_order(full.rows, rows);
            col_order = complete_order(full.cols, cols);
            if (!leading_minor_ok(A.entries, row_order, col_order, r, rank_tol)) {
                throw Error(ErrorCode::RankMismatch,
                            "pivot search failed singular-value validation");
            }
        }
    }

    PivotPlan plan;
    plan.rank = r;
    plan.row_order = row_order;
    plan.col_order = col_order;
    plan.row_permutation_used = !is_identity_order(row_order);
    plan.column_permutation_used = !is_identity_order(col_order);
    plan.target_perm = make_permutation(TransformKind::TargetAffine, row_order, "perm_rows");
    // Source permutation h with G∘h = G' for column-permuted data: component
    // j of h must be x at the position where original column j landed.
    plan.source_perm = make_permutation(TransformKind::SourceAffine,
                                        inverse_permutation(col_order), "perm_cols");
    return plan;
}

CoefficientMatrix permuted_matrix(const CoefficientMatrix& A, const PivotPlan& plan) {
    CoefficientMatrix out;
    out.k = A.k;
    out.n = A.n;
    out.entries.resize(A.entries.rows(), A.entries.cols());
    for (int i = 0; i < A.entries.rows(); ++i) {
        for (int j = 0; j < A.entries.cols(); ++j) {
            out.entries(i, j) = A.entries(plan.row_order[i], plan.col_order[j]);
        }
    }
    return out;
}

CenterConfig permuted_centers(const CenterConfig& p, const PivotPlan& plan) {
    CenterConfig out;
    out.points.resize(p.points.rows(), p.points.cols());
    for (int i = 0; i < p.points.rows(); ++i) {
        for (int j = 0; j < p.points.cols(); ++j) {
            out.points(i, j) = p.points(plan.row_order[i], plan.col_order[j]);
        }
    }
    return out;
}

CoefficientMatrix distance_squared_matrix(int n, int k) {
    CoefficientMatrix A;
    A.n = n;
    A.k = k;
    A.entries = Eigen::MatrixXd::Ones(k + 1, n + 1);
    return A;
}

CoefficientMatrix lorentzian_matrix(int n, int k) {
    CoefficientMatrix A = distance_squared_matrix(n, k);
    A.entries.col(0).setConstant(-1.0);
    return A;
}

} // namespace gds
