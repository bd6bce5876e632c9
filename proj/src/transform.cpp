#include "gds/transform.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>

namespace gds {

namespace {

PolyMap affine_polymap(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& shift) {
    const int m = static_cast<int>(matrix.rows());
    const int n = static_cast<int>(matrix.cols());
    std::vector<std::vector<Term>> comps(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            if (matrix(i, j) == 0.0) continue;
            Exponents e(n, 0);
            e[j] = 1;
            comps[i].push_back({e, matrix(i, j)});
        }
        if (shift[i] != 0.0) comps[i].push_back({Exponents(n, 0), shift[i]});
    }
    return PolyMap(n, std::move(comps));
}

void check_shear_shape(const PolyMap& map) {
    const int n = map.n_vars();
    if (map.n_components() != n) {
        throw Error(ErrorCode::DimensionMismatch, "shear: map is not square");
    }
    // Identity components may appear in the quadratic part of the others;
    // every non-identity component must keep a nonzero own-variable term and
    // otherwise involve identity components only.
    std::vector<bool> is_identity(n, false);
    for (int i = 0; i < n; ++i) {
        Exponents self(n, 0);
        self[i] = 1;
        const auto& comp = map.component(i);
        is_identity[i] = comp.size() == 1 && comp[0].exp == self && comp[0].coef == 1.0;
    }
    for (int i = 0; i < n; ++i) {
        if (is_identity[i]) continue;
        bool has_self = false;
        for (const Term& t : map.component(i)) {
            if (t.exp[i] > 0) {
                Exponents self(n, 0);
                self[i] = 1;
                if (t.exp != self) {
                    throw Error(ErrorCode::InvalidArgument,
                                "shear: own variable enters component " + std::to_string(i) +
                                " nonlinearly");
                }
                has_self = true;
                continue;
            }
            for (int v = 0; v < n; ++v) {
                if (t.exp[v] > 0 && !is_identity[v]) {
                    throw Error(ErrorCode::InvalidArgument,
                                "shear: component " + std::to_string(i) +
                                " depends on non-identity component " + std::to_string(v));
                }
            }
        }
        if (!has_self) {
            throw Error(ErrorCode::InvalidArgument,
                        "shear: component " + std::to_string(i) + " lost its own variable");
        }
    }
    if (map.degree() > 2) {
        throw Error(ErrorCode::DegreeOverflow, "shear: degree exceeds 2");
    }
}

} // namespace

const char* transform_kind_name(TransformKind kind) {
    switch (kind) {
        case TransformKind::SourceAffine: return "SourceAffine";
        case TransformKind::TargetAffine: return "TargetAffine";
        case TransformKind::TargetShear: return "TargetShear";
    }
    return "Unknown";
}

double roundtrip_defect(const PolyMap& forward, const PolyMap& inverse) {
    const double scale = 1.0 + std::max(forward.max_abs_coefficient(),
                                        inverse.max_abs_coefficient());
    const double fwd_inv = identity_defect(compose(forward, inverse));
    const double inv_fwd = identity_defect(compose(inverse, forward));
    return std::max(fwd_inv, inv_fwd) / scale;
}

ElementaryTransform make_affine(TransformKind kind, const Eigen::MatrixXd& matrix,
                                const Eigen::VectorXd& shift, std::string label,
                                double tol) {
    if (kind == TransformKind::TargetShear) {
        throw Error(ErrorCode::InvalidArgument, "make_affine: shear kind");
    }
    if (matrix.rows() != matrix.cols() || matrix.rows() != shift.size()) {
        throw Error(ErrorCode::DimensionMismatch, "make_affine: shape mismatch");
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(matrix);
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::SingularMatrix, "make_affine: singular matrix in " + label);
    }
    const Eigen::MatrixXd inv = lu.inverse();
    ElementaryTransform t{kind, affine_polymap(matrix, shift),
                          affine_polymap(inv, -inv * shift), std::move(label)};
    t.roundtrip_defect = roundtrip_defect(t.forward, t.inverse);
    if (t.roundtrip_defect > tol) {
        throw Error(ErrorCode::SingularMatrix,
                    "make_affine: round-trip defect " + std::to_string(t.roundtrip_defect) +
                    " exceeds tolerance in " + t.label);
    }
    return t;
}

ElementaryTransform make_translation(TransformKind kind, const Eigen::VectorXd& shift,
                                     std::string label) {
    const int n = static_cast<int>(shift.size());
    return make_affine(kind, Eigen::MatrixXd::Identity(n, n), shift, std::move(label));
}

ElementaryTransform make_permutation(TransformKind kind, const std::vector<int>& order,
                                     std::string label) {
    const int n = static_cast<int>(order.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        if (order[i] < 0 || order[i] >= n) {
            throw Error(ErrorCode::InvalidArgument, "make_permutation: index out of range");
        }
        m(i, order[i]) = 1.0;
    }
    return make_affine(kind, m, Eigen::VectorXd::Zero(n), std::move(label));
}

ElementaryTransform make_shear(PolyMap forward, PolyMap inverse, std::string label,
                               double tol) {
    check_shear_shape(forward);
    check_shear_shape(inverse);
    ElementaryTransform t{TransformKind::TargetShear, std::move(forward),
                          std::move(inverse), std::move(label)};
    t.roundtrip_defect = roundtrip_defect(t.forward, t.inverse);
    if (t.roundtrip_defect > tol) {
        throw Error(ErrorCode::SelfCheckFailure,
                    "make_shear: round-trip defect " + std::to_string(t.roundtrip_defect) +
                    " exceeds tolerance in " + t.label);
    }
    return t;
}

PolyMap target_composite(std::span<const ElementaryTransform> steps, int dim) {
    PolyMap acc = PolyMap::identity(dim);
    for (const ElementaryTransform& t : steps) acc = compose(t.forward, acc);
    return acc;
}

PolyMap source_composite(std::span<const ElementaryTransform> steps, int dim) {
    PolyMap acc = PolyMap::identity(dim);
    for (const ElementaryTransform& t : steps) acc = compose(acc, t.forward);
    return acc;
}

PolyMap apply_target(const ElementaryTransform& t, const PolyMap& map) {
    return compose(t.forward, map);
}

PolyMap apply_source(const PolyMap& map, const ElementaryTransform& t) {
    return compose(map, t.forward);
}

std::vector<int> inverse_permutation(const std::vector<int>& order) {
    std::vector<int> inv(order.size());
    for (int i = 0; i < static_cast<int>(order.size()); ++i) inv[order[i]] = i;
    return inv;
}

} // namespace gds
