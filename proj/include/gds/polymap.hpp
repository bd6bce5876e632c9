#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "gds/errors.hpp"

namespace gds {

// Exponent vector of a monomial; entry v is the power of variable v.
using Exponents = std::vector<int>;

struct Term {
    Exponents exp;
    double coef = 0.0;
};

// Graded lexicographic order: lower total degree first, ties broken by the
// exponent vector compared entry by entry.
bool grlex_less(const Exponents& a, const Exponents& b);

/// Sparse polynomial map R^n -> R^m with double coefficients.
///
/// Components are kept in canonical form: terms sorted graded-lex, duplicate
/// monomials merged, and coefficients with |c| <= kCoefficientDropTol times
/// the largest coefficient of the component removed. The drop rule is what
/// lets long composition chains cancel terms exactly instead of accumulating
/// float dust. Component degree is capped at kMaxDegree; the pipelines never
/// produce more and the constructor rejects higher.
///
/// All instances are immutable after construction.
class PolyMap {
public:
    static constexpr int kMaxDegree = 4;
    static constexpr double kCoefficientDropTol = 1e-12;

    PolyMap() = default; // empty map R^0 -> R^0
    PolyMap(int n_vars, std::vector<std::vector<Term>> components);

    static PolyMap identity(int n);
    static PolyMap zero(int n_vars, int m);
    // Constant map: every component a constant.
    static PolyMap constant(int n_vars, const Eigen::VectorXd& values);

    int n_vars() const { return n_vars_; }
    int n_components() const { return static_cast<int>(components_.size()); }

    const std::vector<Term>& component(int i) const { return components_[i]; }

    int degree() const;
    int component_degree(int i) const;

    // Stored coefficient of the given monomial, or 0 when absent.
    double coefficient(int component, const Exponents& monomial) const;

    // Largest |coefficient| over all components (0 for the zero map).
    double max_abs_coefficient() const;

    Eigen::VectorXd eval(const Eigen::VectorXd& x) const;

    // Matrix of partial derivatives at x, n_components x n_vars.
    Eigen::MatrixXd jacobian_at(const Eigen::VectorXd& x) const;

    // Max |coefficient| of (*this - other), taken over matching monomials.
    double coefficient_distance(const PolyMap& other) const;

    std::string to_string() const;

private:
    int n_vars_ = 0;
    std::vector<std::vector<Term>> components_;
};

// Coefficient-exact composition: eval(compose(f, g), x) == eval(f, eval(g, x)).
// Requires f.n_vars() == g.n_components(); the canonical result must stay
// within the degree cap.
PolyMap compose(const PolyMap& outer, const PolyMap& inner);

// Componentwise sum / difference / scalar multiple.
PolyMap sum(const PolyMap& f, const PolyMap& g);
PolyMap difference(const PolyMap& f, const PolyMap& g);
PolyMap scaled(const PolyMap& f, double factor);

// Largest |coefficient| of (f - identity); used by round-trip checks.
double identity_defect(const PolyMap& f);

} // namespace gds
