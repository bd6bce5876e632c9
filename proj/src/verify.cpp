#include "gds/verify.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gds {

namespace {

// Determinant of the leading square block of the Jacobian at x.
double leading_minor_det(const PolyMap& f, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd j = f.jacobian_at(x);
    return j.topRows(f.n_vars()).determinant();
}

} // namespace

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double sample_unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) + stream) + index);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Eigen::VectorXd sample_point(const SampleSpec& spec, int dim, std::uint64_t index,
                             std::uint64_t stream) {
    Eigen::VectorXd x(dim);
    for (int v = 0; v < dim; ++v) {
        const double u = sample_unit(spec.seed, stream,
                                     index * static_cast<std::uint64_t>(dim) + v);
        x[v] = spec.half_width * (2.0 * u - 1.0);
    }
    return x;
}

EqualityReport check_map_equality(const PolyMap& f, const PolyMap& g,
                                  const SampleSpec& spec) {
    if (f.n_vars() != g.n_vars() || f.n_components() != g.n_components()) {
        throw Error(ErrorCode::DimensionMismatch, "check_map_equality: shape mismatch");
    }
    EqualityReport out;
    for (int s = 0; s < spec.count; ++s) {
        const Eigen::VectorXd x = sample_point(spec, f.n_vars(), s);
        const Eigen::VectorXd fy = f.eval(x);
        const Eigen::VectorXd gy = g.eval(x);
        out.max_rel_deviation = std::max(out.max_rel_deviation,
                                         (fy - gy).norm() / (1.0 + gy.norm()));
    }
    out.coef_comparable = true;
    out.max_coef_diff = f.coefficient_distance(g);
    return out;
}

RoundtripReport check_roundtrip(const ElementaryTransform& t, const SampleSpec& spec) {
    RoundtripReport out;
    out.coefficient_defect = t.roundtrip_defect;
    for (int s = 0; s < spec.count; ++s) {
        const Eigen::VectorXd x = sample_point(spec, t.forward.n_vars(), s);
        const double fwd = (t.inverse.eval(t.forward.eval(x)) - x).norm() / (1.0 + x.norm());
        const double bwd = (t.forward.eval(t.inverse.eval(x)) - x).norm() / (1.0 + x.norm());
        out.max_deviation = std::max({out.max_deviation, fwd, bwd});
    }
    if (t.kind != TransformKind::TargetShear) {
        // Linear part = Jacobian anywhere for an affine map.
        const Eigen::MatrixXd lin =
            t.forward.jacobian_at(Eigen::VectorXd::Zero(t.forward.n_vars()));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(lin);
        const double smin = svd.singularValues().tail(1)(0);
        out.condition_number = smin > 0.0 ? svd.singularValues()(0) / smin
                                          : std::numeric_limits<double>::infinity();
    }
    out.warning = out.condition_number >= kConditionWarningThreshold;
    return out;
}

SingularPointReport find_singular_point(const PolyMap& f, const SampleSpec& spec,
                                        double sv_tol, int max_lines) {
    SingularPointReport out;
    const int dim = f.n_vars();
    if (f.n_components() < dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    "find_singular_point: fewer components than variables");
    }

    auto accept = [&](const Eigen::VectorXd& x) {
        const Eigen::MatrixXd j = f.jacobian_at(x);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
        const double largest = svd.singularValues()(0);
        const double smallest = svd.singularValues().tail(1)(0);
        if (largest == 0.0 || smallest <= sv_tol * largest) {
            out.found = true;
            out.point = x;
            out.smallest_singular_value = smallest;
            out.jacobian_scale = largest;
            return true;
        }
        return false;
    };

    // Cheap canonical candidate before any line work: maps whose singular
    // set is a single point tend to place it at the origin of the reduced
    // coordinates, where no random line would land.
    if (accept(Eigen::VectorXd::Zero(dim))) return out;

    constexpr int kLineSamples = 64;
    constexpr int kBisectIters = 80;
    for (int line = 0; line < max_lines && !out.found; ++line) {
        out.lines_tried = line + 1;
        const Eigen::VectorXd base = sample_point(spec, dim, line, /*stream=*/101);
        Eigen::VectorXd dir = sample_point(spec, dim, line, /*stream=*/202);
        if (dir.norm() == 0.0) continue;
        dir.normalize();
        auto det_at = [&](double tt) { return leading_minor_det(f, base + tt * dir); };

        double prev_t = -2.0 * spec.half_width;
        double prev_v = det_at(prev_t);
        double det_scale = std::abs(prev_v);
        for (int s = 1; s <= kLineSamples && !out.found; ++s) {
            const double t = -2.0 * spec.half_width +
                             4.0 * spec.half_width * static_cast<double>(s) / kLineSamples;
            const double v = det_at(t);
            det_scale = std::max(det_scale, std::abs(v));
            if ((prev_v < 0.0) != (v < 0.0)) {
                double lo = prev_t, hi = t, flo = prev_v;
                for (int it = 0; it < kBisectIters; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = det_at(mid);
                    if ((flo < 0.0) == (fm < 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                accept(base + 0.5 * (lo + hi) * dir);
            } else if (std::abs(v) <= 1e-9 * (1.0 + det_scale)) {
                // Touching root with no sign change: polish by golden-section
                // on |det| around the sample.
                double lo = prev_t, hi = std::min(t + (t - prev_t), 2.0 * spec.half_width);
                const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
                double a = lo, b = hi;
                for (int it = 0; it < kBisectIters; ++it) {
                    const double c1 = b - gr * (b - a);
                    const double c2 = a + gr * (b - a);
                    if (std::abs(det_at(c1)) < std::abs(det_at(c2))) b = c2;
                    else a = c1;
                }
                accept(base + 0.5 * (a + b) * dir);
            }
            prev_t = t;
            prev_v = v;
        }
    }
    return out;
}

FlatImageReport check_image_flat(const PolyMap& f, int last_m, double tol) {
    if (last_m < 0 || last_m > f.n_components()) {
        throw Error(ErrorCode::DimensionMismatch, "check_image_flat: bad component count");
    }
    FlatImageReport out;
    out.scale = 1.0 + f.max_abs_coefficient();
    const Exponents zero(f.n_vars(), 0);
    for (int i = f.n_components() - last_m; i < f.n_components(); ++i) {
        for (const Term& t : f.component(i)) {
            if (t.exp == zero) continue;
            out.max_nonconstant_coef = std::max(out.max_nonconstant_coef, std::abs(t.coef));
        }
    }
    out.flat = out.max_nonconstant_coef <= tol * out.scale;
    return out;
}

} // namespace gds
