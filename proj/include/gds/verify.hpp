#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "gds/polymap.hpp"
#include "gds/transform.hpp"

namespace gds {

/// Deterministic sampling plan. The stream is a pure function of
/// (seed, stream, index), so parallel evaluation order cannot change results.
struct SampleSpec {
    double half_width = 2.0;
    int count = 1000;
    std::uint64_t seed = 0;
};

std::uint64_t splitmix64(std::uint64_t z);

// Uniform double in [0, 1), fully determined by its three indices.
double sample_unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Point index `index` of the spec's stream, uniform in [-hw, hw]^dim.
Eigen::VectorXd sample_point(const SampleSpec& spec, int dim, std::uint64_t index,
                             std::uint64_t stream = 0);

struct EqualityReport {
    double max_rel_deviation = 0.0; // max over samples of |f-g| / (1 + |g|)
    double max_coef_diff = 0.0;     // coefficient-level distance when comparable
    bool coef_comparable = false;
};

EqualityReport check_map_equality(const PolyMap& f, const PolyMap& g,
                                  const SampleSpec& spec = {});

struct RoundtripReport {
    double max_deviation = 0.0; // max over samples, relative to 1 + |x|
    double coefficient_defect = 0.0;
    double condition_number = 1.0; // of the linear part, affine kinds only
    bool warning = false;
};

inline constexpr double kConditionWarningThreshold = 1e8;

RoundtripReport check_roundtrip(const ElementaryTransform& t, const SampleSpec& spec = {});

struct SingularPointReport {
    bool found = false;
    Eigen::VectorXd point;
    double smallest_singular_value = 0.0;
    double jacobian_scale = 0.0; // largest singular value at the point
    int lines_tried = 0;
};

// Searches for a point where the differential drops rank: the determinant of
// the leading square Jacobian minor is scanned along random lines through the
// sample box, roots are bracketed by sign change (or polished from a near-zero
// local minimum), and every candidate is accepted only if the full Jacobian's
// smallest singular value clears the threshold.
SingularPointReport find_singular_point(const PolyMap& f, const SampleSpec& spec = {},
                                        double sv_tol = 1e-8, int max_lines = 50);

struct FlatImageReport {
    bool flat = false;
    double max_nonconstant_coef = 0.0;
    double scale = 0.0;
};

// Do the last `last_m` components carry anything beyond constants?
FlatImageReport check_image_flat(const PolyMap& f, int last_m, double tol = 1e-10);

} // namespace gds
