#include "gds/polymap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace gds {

namespace {

int total_degree(const Exponents& e) {
    return std::accumulate(e.begin(), e.end(), 0);
}

// Accumulator used by arithmetic before canonicalization.
using TermMap = std::map<Exponents, double>;

void add_term(TermMap& acc, const Exponents& e, double c) {
    if (c == 0.0) return;
    acc[e] += c;
}

TermMap multiply(const TermMap& a, const TermMap& b, int n_vars) {
    TermMap out;
    Exponents e(n_vars);
    for (const auto& [ea, ca] : a) {
        for (const auto& [eb, cb] : b) {
            for (int v = 0; v < n_vars; ++v) e[v] = ea[v] + eb[v];
            out[e] += ca * cb;
        }
    }
    return out;
}

TermMap to_term_map(const std::vector<Term>& component) {
    TermMap out;
    for (const Term& t : component) add_term(out, t.exp, t.coef);
    return out;
}

std::vector<Term> from_term_map(const TermMap& m) {
    std::vector<Term> out;
    out.reserve(m.size());
    for (const auto& [e, c] : m) out.push_back({e, c});
    return out;
}

} // namespace

bool grlex_less(const Exponents& a, const Exponents& b) {
    const int da = total_degree(a);
    const int db = total_degree(b);
    if (da != db) return da < db;
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

PolyMap::PolyMap(int n_vars, std::vector<std::vector<Term>> components)
    : n_vars_(n_vars), components_(std::move(components)) {
    if (n_vars_ < 0) throw Error(ErrorCode::InvalidArgument, "negative variable count");
    for (auto& comp : components_) {
        TermMap merged;
        for (const Term& t : comp) {
            if (static_cast<int>(t.exp.size()) != n_vars_) {
                throw Error(ErrorCode::DimensionMismatch,
                            "monomial exponent vector does not match variable count");
            }
            for (int e : t.exp) {
                if (e < 0) throw Error(ErrorCode::InvalidArgument, "negative exponent");
            }
            add_term(merged, t.exp, t.coef);
        }
        double max_abs = 0.0;
        for (const auto& [e, c] : merged) max_abs = std::max(max_abs, std::abs(c));
        comp.clear();
        for (const auto& [e, c] : merged) {
            if (std::abs(c) <= kCoefficientDropTol * max_abs) continue;
            if (total_degree(e) > kMaxDegree) {
                throw Error(ErrorCode::DegreeOverflow,
                            "component degree exceeds " + std::to_string(kMaxDegree));
            }
            comp.push_back({e, c});
        }
        std::sort(comp.begin(), comp.end(),
                  [](const Term& a, const Term& b) { return grlex_less(a.exp, b.exp); });
    }
}

PolyMap PolyMap::identity(int n) {
    std::vector<std::vector<Term>> comps(n);
    for (int i = 0; i < n; ++i) {
        Exponents e(n, 0);
        e[i] = 1;
        comps[i].push_back({e, 1.0});
    }
    return PolyMap(n, std::move(comps));
}

PolyMap PolyMap::zero(int n_vars, int m) {
    return PolyMap(n_vars, std::vector<std::vector<Term>>(m));
}

PolyMap PolyMap::constant(int n_vars, const Eigen::VectorXd& values) {
    std::vector<std::vector<Term>> comps(values.size());
    for (int i = 0; i < values.size(); ++i) {
        if (values[i] != 0.0) comps[i].push_back({Exponents(n_vars, 0), values[i]});
    }
    return PolyMap(n_vars, std::move(comps));
}

int PolyMap::degree() const {
    int d = 0;
    for (int i = 0; i < n_components(); ++i) d = std::max(d, component_degree(i));
    return d;
}

int PolyMap::component_degree(int i) const {
    // Canonical ordering puts the highest-degree term last.
    const auto& comp = components_[i];
    return comp.empty() ? 0 : total_degree(comp.back().exp);
}

double PolyMap::coefficient(int component, const Exponents& monomial) const {
    if (component < 0 || component >= n_components()) return 0.0;
    if (static_cast<int>(monomial.size()) != n_vars_) return 0.0;
    for (const Term& t : components_[component]) {
        if (t.exp == monomial) return t.coef;
    }
    return 0.0;
}

double PolyMap::max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& comp : components_)
        for (const Term& t : comp) m = std::max(m, std::abs(t.coef));
    return m;
}

Eigen::VectorXd PolyMap::eval(const Eigen::VectorXd& x) const {
    if (x.size() != n_vars_) {
        throw Error(ErrorCode::DimensionMismatch, "eval: point dimension " +
                    std::to_string(x.size()) + " != " + std::to_string(n_vars_));
    }
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n_components());
    for (int i = 0; i < n_components(); ++i) {
        double acc = 0.0;
        for (const Term& t : components_[i]) {
            double mono = t.coef;
            for (int v = 0; v < n_vars_; ++v) {
                for (int e = 0; e < t.exp[v]; ++e) mono *= x[v];
            }
            acc += mono;
        }
        y[i] = acc;
    }
    return y;
}

Eigen::MatrixXd PolyMap::jacobian_at(const Eigen::VectorXd& x) const {
    if (x.size() != n_vars_) {
        throw Error(ErrorCode::DimensionMismatch, "jacobian: point dimension mismatch");
    }
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_components(), n_vars_);
    for (int i = 0; i < n_components(); ++i) {
        for (const Term& t : components_[i]) {
            for (int v = 0; v < n_vars_; ++v) {
                if (t.exp[v] == 0) continue;
                double mono = t.coef * t.exp[v];
                for (int w = 0; w < n_vars_; ++w) {
                    const int e = (w == v) ? t.exp[w] - 1 : t.exp[w];
                    for (int r = 0; r < e; ++r) mono *= x[w];
                }
                jac(i, v) += mono;
            }
        }
    }
    return jac;
}

double PolyMap::coefficient_distance(const PolyMap& other) const {
    if (n_vars_ != other.n_vars_ || n_components() != other.n_components()) {
        throw Error(ErrorCode::DimensionMismatch, "coefficient_distance: shape mismatch");
    }
    double worst = 0.0;
    for (int i = 0; i < n_components(); ++i) {
        TermMap diff = to_term_map(components_[i]);
        for (const Term& t : other.components_[i]) add_term(diff, t.exp, -t.coef);
        for (const auto& [e, c] : diff) worst = std::max(worst, std::abs(c));
    }
    return worst;
}

std::string PolyMap::to_string() const {
    std::ostringstream os;
    for (int i = 0; i < n_components(); ++i) {
        if (i) os << "; ";
        if (components_[i].empty()) {
            os << "0";
            continue;
        }
        bool first = true;
        for (const Term& t : components_[i]) {
            if (!first) os << " + ";
            first = false;
            os << t.coef;
            for (int v = 0; v < n_vars_; ++v) {
                if (t.exp[v] == 0) continue;
                os << "*x" << v;
                if (t.exp[v] > 1) os << "^" << t.exp[v];
            }
        }
    }
    return os.str();
}

PolyMap compose(const PolyMap& outer, const PolyMap& inner) {
    if (outer.n_vars() != inner.n_components()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "compose: outer expects " + std::to_string(outer.n_vars()) +
                    " inputs, inner provides " + std::to_string(inner.n_components()));
    }
    const int n = inner.n_vars();

    // Powers of each inner component, filled on demand. powers[v][e] = inner_v^e.
    std::vector<std::vector<TermMap>> powers(inner.n_components());
    auto power_of = [&](int v, int e) -> const TermMap& {
        auto& cache = powers[v];
        if (cache.empty()) {
            cache.emplace_back();
            add_term(cache.back(), Exponents(n, 0), 1.0);
            cache.push_back(to_term_map(inner.component(v)));
        }
        while (static_cast<int>(cache.size()) <= e) {
            cache.push_back(multiply(cache.back(), cache[1], n));
        }
        return cache[e];
    };

    std::vector<std::vector<Term>> comps(outer.n_components());
    for (int i = 0; i < outer.n_components(); ++i) {
        TermMap acc;
        for (const Term& t : outer.component(i)) {
            TermMap prod;
            add_term(prod, Exponents(n, 0), t.coef);
            for (int v = 0; v < outer.n_vars(); ++v) {
                if (t.exp[v] == 0) continue;
                prod = multiply(prod, power_of(v, t.exp[v]), n);
            }
            for (const auto& [e, c] : prod) add_term(acc, e, c);
        }
        comps[i] = from_term_map(acc);
    }
    // The constructor canonicalizes; degree overflow surfaces there after
    // exact cancellation has had its chance.
    return PolyMap(n, std::move(comps));
}

PolyMap sum(const PolyMap& f, const PolyMap& g) {
    if (f.n_vars() != g.n_vars() || f.n_components() != g.n_components()) {
        throw Error(ErrorCode::DimensionMismatch, "sum: shape mismatch");
    }
    std::vector<std::vector<Term>> comps(f.n_components());
    for (int i = 0; i < f.n_components(); ++i) {
        comps[i] = f.component(i);
        comps[i].insert(comps[i].end(), g.component(i).begin(), g.component(i).end());
    }
    return PolyMap(f.n_vars(), std::move(comps));
}

PolyMap difference(const PolyMap& f, const PolyMap& g) {
    return sum(f, scaled(g, -1.0));
}

PolyMap scaled(const PolyMap& f, double factor) {
    std::vector<std::vector<Term>> comps(f.n_components());
    for (int i = 0; i < f.n_components(); ++i) {
        comps[i] = f.component(i);
        for (Term& t : comps[i]) t.coef *= factor;
    }
    return PolyMap(f.n_vars(), std::move(comps));
}

double identity_defect(const PolyMap& f) {
    if (f.n_vars() != f.n_components()) {
        throw Error(ErrorCode::DimensionMismatch, "identity_defect: map is not square");
    }
    return f.coefficient_distance(PolyMap::identity(f.n_vars()));
}

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DegreeOverflow: return "DegreeOverflow";
        case ErrorCode::ZeroEntry: return "ZeroEntry";
        case ErrorCode::RankMismatch: return "RankMismatch";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::BadSet: return "BadSet";
        case ErrorCode::DegenerateKernel: return "DegenerateKernel";
        case ErrorCode::WrongBranch: return "WrongBranch";
        case ErrorCode::SelfCheckFailure: return "SelfCheckFailure";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

} // namespace gds
