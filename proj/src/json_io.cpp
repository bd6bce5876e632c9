#include "gds/json_io.hpp"

#include <string>

namespace gds {

namespace {

Error bad_input(const std::string& what) {
    return Error(ErrorCode::InvalidArgument, what);
}

} // namespace

Json matrix_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (int i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
    if (!j.is_array()) throw bad_input("expected an array of rows");
    const int rows = static_cast<int>(j.size());
    int cols = -1;
    for (const Json& row : j) {
        if (!row.is_array()) throw bad_input("expected an array of numbers per row");
        if (cols < 0) cols = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != cols) throw bad_input("ragged matrix rows");
    }
    Eigen::MatrixXd m(rows, std::max(cols, 0));
    for (int i = 0; i < rows; ++i) {
        for (int c = 0; c < cols; ++c) {
            if (!j[i][c].is_number()) throw bad_input("matrix entries must be numbers");
            m(i, c) = j[i][c].get<double>();
        }
    }
    return m;
}

Eigen::VectorXd vector_from_json(const Json& j) {
    if (!j.is_array()) throw bad_input("expected an array of numbers");
    Eigen::VectorXd v(j.size());
    for (int i = 0; i < static_cast<int>(j.size()); ++i) {
        if (!j[i].is_number()) throw bad_input("vector entries must be numbers");
        v(i) = j[i].get<double>();
    }
    return v;
}

Json to_json(const PolyMap& map) {
    Json comps = Json::array();
    for (int i = 0; i < map.n_components(); ++i) {
        Json terms = Json::array();
        for (const Term& t : map.component(i)) {
            terms.push_back(Json{{"exp", t.exp}, {"coef", t.coef}});
        }
        comps.push_back(std::move(terms));
    }
    return Json{{"n_vars", map.n_vars()}, {"components", std::move(comps)}};
}

PolyMap polymap_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("n_vars") || !j.contains("components")) {
        throw bad_input("polynomial map needs n_vars and components");
    }
    const int n_vars = j.at("n_vars").get<int>();
    std::vector<std::vector<Term>> comps;
    for (const Json& comp : j.at("components")) {
        std::vector<Term> terms;
        for (const Json& term : comp) {
            Term t;
            t.exp = term.at("exp").get<std::vector<int>>();
            t.coef = term.at("coef").get<double>();
            terms.push_back(std::move(t));
        }
        comps.push_back(std::move(terms));
    }
    return PolyMap(n_vars, std::move(comps));
}

Json to_json(const ElementaryTransform& t) {
    return Json{{"kind", transform_kind_name(t.kind)},
                {"label", t.label},
                {"forward", to_json(t.forward)},
                {"inverse", to_json(t.inverse)},
                {"roundtrip_defect", t.roundtrip_defect}};
}

ElementaryTransform transform_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    TransformKind tk;
    if (kind == "SourceAffine") tk = TransformKind::SourceAffine;
    else if (kind == "TargetAffine") tk = TransformKind::TargetAffine;
    else if (kind == "TargetShear") tk = TransformKind::TargetShear;
    else throw bad_input("unknown transform kind: " + kind);
    return ElementaryTransform{tk, polymap_from_json(j.at("forward")),
                               polymap_from_json(j.at("inverse")),
                               j.at("label").get<std::string>(),
                               j.value("roundtrip_defect", 0.0)};
}

Json to_json(const ProblemInstance& inst) {
    return Json{{"n", inst.n},
                {"k", inst.k},
                {"A", matrix_json(inst.A.entries)},
                {"p", matrix_json(inst.p.points)}};
}

ProblemInstance instance_from_json(const Json& j) {
    if (!j.is_object()) throw bad_input("instance must be an object");
    for (const char* field : {"n", "k", "A", "p"}) {
        if (!j.contains(field)) throw bad_input(std::string("instance missing \"") +
                                                field + "\"");
    }
    ProblemInstance inst;
    if (!j.at("n").is_number_integer() || !j.at("k").is_number_integer()) {
        throw bad_input("n and k must be integers");
    }
    inst.n = j.at("n").get<int>();
    inst.k = j.at("k").get<int>();
    if (inst.n < 1 || inst.k < 1) throw bad_input("need n >= 1 and k >= 1");

    inst.A.n = inst.n;
    inst.A.k = inst.k;
    if (j.at("A").is_string()) {
        const std::string name = j.at("A").get<std::string>();
        if (name == "distance-squared") {
            inst.A = distance_squared_matrix(inst.n, inst.k);
        } else if (name == "lorentzian") {
            inst.A = lorentzian_matrix(inst.n, inst.k);
        } else {
            throw bad_input("unknown matrix name: " + name);
        }
    } else {
        inst.A.entries = matrix_from_json(j.at("A"));
        if (inst.A.entries.rows() != inst.k + 1 || inst.A.entries.cols() != inst.n + 1) {
            throw bad_input("A must be (k+1) x (n+1)");
        }
    }
    inst.p.points = matrix_from_json(j.at("p"));
    if (inst.p.points.rows() != inst.k + 1 || inst.p.points.cols() != inst.n + 1) {
        throw bad_input("p must hold k+1 centers in R^{n+1}");
    }
    return inst;
}

Json to_json(const BadSetCertificate& cert) {
    Json entries = Json::array();
    for (const CertificateEntry& e : cert.entries) {
        entries.push_back(Json{{"label", e.label},
                               {"determinant", e.determinant},
                               {"scale", e.scale},
                               {"outside", e.outside},
                               {"warning", e.warning}});
    }
    return Json{{"branch", cert.branch == Branch::FullRank ? "full-rank" : "deficient"},
                {"det_tol", cert.det_tol},
                {"all_outside", cert.all_outside},
                {"any_warning", cert.any_warning},
                {"entries", std::move(entries)}};
}

Json to_json(const ReductionTrace& trace) {
    Json snaps = Json::array();
    for (const auto& [label, map] : trace.snapshots) {
        snaps.push_back(Json{{"label", label}, {"map", to_json(map)}});
    }
    return Json{{"lambda1", matrix_json(trace.lambda1)},
                {"lambda2", matrix_json(trace.lambda2)},
                {"b", matrix_json(trace.b)},
                {"c", vector_json(trace.c)},
                {"gamma", matrix_json(trace.gamma)},
                {"d_diag", vector_json(trace.d_diag)},
                {"d_aff_x0", vector_json(trace.d_aff_x0)},
                {"d_aff_xj", vector_json(trace.d_aff_xj)},
                {"d_tilde", vector_json(trace.d_tilde)},
                {"alpha", matrix_json(trace.alpha)},
                {"B", matrix_json(trace.B)},
                {"row_order", trace.row_order},
                {"col_order", trace.col_order},
                {"column_permutation_used", trace.column_permutation_used},
                {"snapshots", std::move(snaps)}};
}

Json to_json(const ReductionResult& result) {
    Json source = Json::array();
    for (const ElementaryTransform& t : result.source_chain) source.push_back(to_json(t));
    Json target = Json::array();
    for (const ElementaryTransform& t : result.target_chain) target.push_back(to_json(t));
    double worst_defect = 0.0;
    for (const ElementaryTransform& t : result.source_chain) {
        worst_defect = std::max(worst_defect, t.roundtrip_defect);
    }
    for (const ElementaryTransform& t : result.target_chain) {
        worst_defect = std::max(worst_defect, t.roundtrip_defect);
    }
    return Json{{"kind", normal_form_kind_name(result.kind)},
                {"certificate", to_json(result.certificate)},
                {"residuals", Json{{"normal_form_coefficient", result.residual},
                                   {"max_roundtrip_defect", worst_defect}}},
                {"source_chain", std::move(source)},
                {"target_chain", std::move(target)},
                {"normal_form", to_json(result.normal_form())},
                {"trace", to_json(result.trace)}};
}

ParsedResult result_from_json(const Json& j) {
    ParsedResult out;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "whitney-umbrella") out.kind = NormalFormKind::WhitneyUmbrella;
    else if (kind == "inclusion") out.kind = NormalFormKind::Inclusion;
    else throw bad_input("unknown normal-form kind: " + kind);
    for (const Json& t : j.at("source_chain")) {
        out.source_chain.push_back(transform_from_json(t));
    }
    for (const Json& t : j.at("target_chain")) {
        out.target_chain.push_back(transform_from_json(t));
    }
    out.residual = j.at("residuals").at("normal_form_coefficient").get<double>();
    return out;
}

Json to_json(const InstabilityWitness& w) {
    return Json{{"q", matrix_json(w.q)},
                {"c", matrix_json(w.c)},
                {"p", matrix_json(w.p)},
                {"b_residual", w.b_residual},
                {"flatness", w.flatness},
                {"singular_point", vector_json(w.singular_point)},
                {"singular_value", w.singular_value},
                {"jacobian_scale", w.jacobian_scale}};
}

Json to_json(const PerturbationSearch& search) {
    Json out{{"found", search.found},
             {"singular_values", vector_json(search.singular_values)},
             {"smallest_singular_value", search.smallest_singular_value},
             {"kernel_dimension", search.kernel_dimension},
             {"min_entry_ratio", search.min_entry_ratio}};
    if (search.found) out["witness"] = to_json(search.witness);
    return out;
}

Json to_json(const WitnessCertification& cert) {
    return Json{{"all_ok", cert.all_ok()},
                {"residual_ok", cert.residual_ok},
                {"flat_ok", cert.flat_ok},
                {"singular_ok", cert.singular_ok},
                {"matrix_ok", cert.matrix_ok},
                {"b_residual", cert.b_residual},
                {"flatness", cert.flatness},
                {"singular_value", cert.singular_value},
                {"scale", cert.scale},
                {"singular_point", vector_json(cert.singular_point)},
                {"violations", cert.violations}};
}

} // namespace gds
