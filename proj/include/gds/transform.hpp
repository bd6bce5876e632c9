#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "gds/polymap.hpp"

namespace gds {

enum class TransformKind { SourceAffine, TargetAffine, TargetShear };

const char* transform_kind_name(TransformKind kind);

/// One invertible step of a coordinate-change chain. The inverse is stored
/// explicitly and the constructor verifies both round-trip compositions
/// against the identity at coefficient level.
struct ElementaryTransform {
    TransformKind kind;
    PolyMap forward;
    PolyMap inverse;
    std::string label;
    double roundtrip_defect = 0.0; // max |coef| of fwd∘inv - id, relative
};

inline constexpr double kRoundtripTol = 1e-12;

// Relative round-trip defect of a forward/inverse pair against the identity.
double roundtrip_defect(const PolyMap& forward, const PolyMap& inverse);

// x -> matrix*x + shift. The inverse is computed from the matrix; throws
// SingularMatrix when the defect of the pair exceeds tol (pass +inf to skip).
ElementaryTransform make_affine(TransformKind kind, const Eigen::MatrixXd& matrix,
                                const Eigen::VectorXd& shift, std::string label,
                                double tol = kRoundtripTol);

// x -> x + shift.
ElementaryTransform make_translation(TransformKind kind, const Eigen::VectorXd& shift,
                                     std::string label);

// Component i of the forward map is x_{order[i]}.
ElementaryTransform make_permutation(TransformKind kind, const std::vector<int>& order,
                                     std::string label);

// Degree-<=2 triangular transform with caller-supplied inverse. Components
// must either be exactly X_i or of the form a*X_i + q(X_identity-components),
// a != 0, with q quadratic in components that are themselves the identity.
ElementaryTransform make_shear(PolyMap forward, PolyMap inverse, std::string label,
                               double tol = kRoundtripTol);

// Composite of a target-side chain in application order: steps[last] ∘ ... ∘ steps[0].
PolyMap target_composite(std::span<const ElementaryTransform> steps, int dim);

// Composite of a source-side chain: steps[0] ∘ ... ∘ steps[last] (steps are
// appended as the pipeline precomposes them, so the last appended acts first).
PolyMap source_composite(std::span<const ElementaryTransform> steps, int dim);

PolyMap apply_target(const ElementaryTransform& t, const PolyMap& map);
PolyMap apply_source(const PolyMap& map, const ElementaryTransform& t);

std::vector<int> inverse_permutation(const std::vector<int>& order);

} // namespace gds
