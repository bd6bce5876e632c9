// gdsmap: batch front door for building, classifying and destabilizing
// generalized distance-squared mappings. JSON is the single wire format;
// the text renderer is a view of the same data.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "gds/instability.hpp"
#include "gds/instance.hpp"
#include "gds/json_io.hpp"
#include "gds/reduction.hpp"
#include "gds/verify.hpp"

namespace {

using gds::Json;

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1; // bad-set or none-indicator outcomes
constexpr int kExitInvalid = 2;

struct Options {
    std::string command;
    std::string input;
    std::uint64_t seed = 0;
    double det_tol = 1e-9;
    double rank_tol = 1e-10;
    int samples = 1000;
    std::string format = "json";
};

Json read_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw gds::Error(gds::ErrorCode::InvalidArgument, "cannot open " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw gds::Error(gds::ErrorCode::InvalidArgument,
                         std::string("malformed JSON: ") + e.what());
    }
    return j;
}

gds::ToleranceConfig tolerances(const Options& opt) {
    gds::ToleranceConfig tol;
    tol.det_tol = opt.det_tol;
    tol.rank_tol = opt.rank_tol;
    return tol;
}

void render_text(const Json& report, std::ostream& os, int depth = 0) {
    const std::string pad(2 * depth, ' ');
    for (const auto& [key, value] : report.items()) {
        if (value.is_object()) {
            os << pad << key << ":\n";
            render_text(value, os, depth + 1);
        } else if (value.is_array() && !value.empty() && value[0].is_object()) {
            os << pad << key << ":\n";
            for (const Json& item : value) {
                os << pad << "  -\n";
                render_text(item, os, depth + 2);
            }
        } else {
            os << pad << key << ": " << value.dump() << "\n";
        }
    }
}

int emit(const Json& report, const Options& opt, int exit_code) {
    if (opt.format == "text") {
        render_text(report, std::cout);
    } else {
        std::cout << report.dump(2) << "\n";
    }
    return exit_code;
}

int run_classify(const Options& opt) {
    const gds::ProblemInstance inst = gds::instance_from_json(read_input(opt.input));
    const gds::Classification c = gds::classify(inst.p, inst.A, tolerances(opt));
    Json report{{"command", "classify"},
                {"seed", opt.seed},
                {"instance", gds::to_json(inst)},
                {"outcome", c.bad_set ? "bad-set" : gds::normal_form_kind_name(c.kind)},
                {"certificate", gds::to_json(c.certificate)}};
    if (c.result) {
        report["residuals"] = Json{{"normal_form_coefficient", c.result->residual}};
    }
    return emit(report, opt, c.bad_set ? kExitNegative : kExitOk);
}

int run_reduce(const Options& opt) {
    const gds::ProblemInstance inst = gds::instance_from_json(read_input(opt.input));
    Json report{{"command", "reduce"}, {"seed", opt.seed},
                {"instance", gds::to_json(inst)}};
    try {
        const gds::Classification c = gds::classify(inst.p, inst.A, tolerances(opt));
        if (c.bad_set) {
            report["outcome"] = "bad-set";
            report["certificate"] = gds::to_json(c.certificate);
            return emit(report, opt, kExitNegative);
        }
        report["outcome"] = gds::normal_form_kind_name(c.kind);
        report["result"] = gds::to_json(*c.result);
        return emit(report, opt, kExitOk);
    } catch (const gds::BadSetError& err) {
        report["outcome"] = "bad-set";
        report["certificate"] = gds::to_json(err.certificate());
        return emit(report, opt, kExitNegative);
    }
}

int run_verify(const Options& opt) {
    const Json stored = read_input(opt.input);
    if (!stored.contains("instance") || !stored.contains("result")) {
        throw gds::Error(gds::ErrorCode::InvalidArgument,
                         "verify expects the JSON emitted by reduce");
    }
    const gds::ProblemInstance inst = gds::instance_from_json(stored.at("instance"));
    const gds::ParsedResult parsed = gds::result_from_json(stored.at("result"));
    const gds::ToleranceConfig tol = tolerances(opt);
    const gds::SampleSpec spec{2.0, opt.samples, opt.seed};

    const gds::PolyMap g = gds::build_gds(inst.p, inst.A);
    gds::PolyMap current = g;
    for (const gds::ElementaryTransform& t : parsed.source_chain) {
        current = gds::apply_source(current, t);
    }
    for (const gds::ElementaryTransform& t : parsed.target_chain) {
        current = gds::apply_target(t, current);
    }
    const gds::PolyMap nf = parsed.kind == gds::NormalFormKind::WhitneyUmbrella
                                ? gds::whitney_umbrella_normal_form(inst.n)
                                : gds::inclusion_normal_form(inst.n, inst.k);
    const double residual = current.coefficient_distance(nf) / g.max_abs_coefficient();
    const gds::EqualityReport eq = gds::check_map_equality(current, nf, spec);

    double worst_roundtrip = 0.0;
    for (const auto* chain : {&parsed.source_chain, &parsed.target_chain}) {
        for (const gds::ElementaryTransform& t : *chain) {
            worst_roundtrip =
                std::max(worst_roundtrip, gds::check_roundtrip(t, spec).max_deviation);
        }
    }

    Json checks = Json::array();
    auto add_check = [&checks](const std::string& name, double value, double threshold) {
        checks.push_back(Json{{"name", name},
                              {"value", value},
                              {"threshold", threshold},
                              {"pass", value <= threshold}});
    };
    add_check("normal_form_coefficient_residual", residual, tol.coef_tol);
    add_check("sampled_deviation", eq.max_rel_deviation, tol.coef_tol * 1e2);
    add_check("chain_roundtrip_deviation", worst_roundtrip, 1e-10);
    add_check("stored_residual_drift", std::abs(residual - parsed.residual), 1e-12);

    bool verified = true;
    for (const Json& c : checks) verified = verified && c.at("pass").get<bool>();
    Json report{{"command", "verify"},
                {"seed", opt.seed},
                {"kind", gds::normal_form_kind_name(parsed.kind)},
                {"verified", verified},
                {"checks", std::move(checks)}};
    return emit(report, opt, verified ? kExitOk : kExitNegative);
}

int run_destabilize(const Options& opt) {
    const Json input = read_input(opt.input);
    const bool forward = input.contains("q") && input.contains("c");
    gds::ProblemInstance inst;
    Json psi_block;
    if (forward) {
        // Forward construction: build the centers from (q, c) first.
        Json with_p = input;
        const Eigen::MatrixXd q = gds::matrix_from_json(input.at("q"));
        const Eigen::MatrixXd c = gds::matrix_from_json(input.at("c"));
        const int n = input.at("n").get<int>();
        Json a_json = input.at("A");
        gds::CoefficientMatrix A;
        if (a_json.is_string()) {
            throw gds::Error(gds::ErrorCode::InvalidArgument,
                             "forward construction needs an explicit matrix");
        }
        A.n = n;
        A.k = input.at("k").get<int>();
        A.entries = gds::matrix_from_json(a_json);
        const Eigen::MatrixXd p = gds::psi_map(q, c, A.top_block());
        with_p["p"] = gds::matrix_json(p);
        with_p.erase("q");
        with_p.erase("c");
        inst = gds::instance_from_json(with_p);
        const gds::PsiJacobianDet det = gds::psi_jacobian_det(q, c, A.top_block());
        psi_block = Json{{"q", gds::matrix_json(q)},
                         {"c", gds::matrix_json(c)},
                         {"jacobian_det", Json{{"finite_difference", det.finite_difference},
                                               {"block", det.block}}}};
    } else {
        inst = gds::instance_from_json(input);
    }
    if (inst.k != 2 * inst.n) {
        throw gds::Error(gds::ErrorCode::InvalidArgument, "destabilize requires k = 2n");
    }
    const gds::SampleSpec spec{2.0, opt.samples, opt.seed};
    const gds::PerturbationSearch search =
        gds::find_unstable_perturbation(inst.p, inst.A, tolerances(opt), spec);
    Json report{{"command", "destabilize"},
                {"seed", opt.seed},
                {"instance", gds::to_json(inst)}};
    if (!psi_block.is_null()) report["psi"] = std::move(psi_block);
    report["search"] = gds::to_json(search);
    if (search.found) {
        report["certification"] =
            gds::to_json(gds::certify_witness(search.witness, inst.A, tolerances(opt), spec));
    }
    return emit(report, opt, search.found ? kExitOk : kExitNegative);
}

int run_sample_badset(const Options& opt) {
    const Json input = read_input(opt.input);
    Json patched = input;
    if (!patched.contains("p")) {
        // The sweep generates its own centers; a placeholder keeps the
        // instance parser happy.
        const int n = patched.at("n").get<int>();
        const int k = patched.at("k").get<int>();
        patched["p"] = gds::matrix_json(Eigen::MatrixXd::Zero(k + 1, n + 1));
    }
    const gds::ProblemInstance inst = gds::instance_from_json(patched);
    const gds::ToleranceConfig tol = tolerances(opt);
    const int rank = gds::numerical_rank(inst.A.entries, tol.rank_tol);
    const gds::Branch branch = (inst.k == 2 * inst.n && rank == inst.n + 1)
                                   ? gds::Branch::FullRank
                                   : gds::Branch::Deficient;

    int outside = 0, warnings = 0;
    Json inside_examples = Json::array();
    for (int s = 0; s < opt.samples; ++s) {
        gds::CenterConfig p;
        p.points.resize(inst.k + 1, inst.n + 1);
        std::uint64_t idx = 0;
        for (int i = 0; i <= inst.k; ++i) {
            for (int j = 0; j <= inst.n; ++j) {
                p.points(i, j) = 2.0 * gds::sample_unit(opt.seed, 1,
                                                        static_cast<std::uint64_t>(s) *
                                                                ((inst.k + 1) * (inst.n + 1)) +
                                                            idx++) -
                                 1.0;
            }
        }
        const gds::BadSetCertificate cert = gds::badset_certificate(p, inst.A, branch, tol);
        if (cert.all_outside) ++outside;
        else if (inside_examples.size() < 3) {
            inside_examples.push_back(Json{{"sample", s}, {"certificate", gds::to_json(cert)}});
        }
        if (cert.any_warning) ++warnings;
    }
    Json report{{"command", "sample-badset"},
                {"seed", opt.seed},
                {"samples", opt.samples},
                {"branch", branch == gds::Branch::FullRank ? "full-rank" : "deficient"},
                {"outside", outside},
                {"fraction_outside", static_cast<double>(outside) / opt.samples},
                {"warnings", warnings},
                {"inside_examples", std::move(inside_examples)}};
    return emit(report, opt, kExitOk);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"generalized distance-squared mapping toolkit"};
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&opt](CLI::App* cmd) {
        cmd->add_option("--input", opt.input, "instance or report JSON file")
            ->required()
            ->envname("GDSMAP_INPUT");
        cmd->add_option("--seed", opt.seed, "seed for every sampled quantity")
            ->envname("GDSMAP_SEED");
        cmd->add_option("--tol", opt.det_tol, "certificate determinant threshold")
            ->envname("GDSMAP_TOL");
        cmd->add_option("--rank-tol", opt.rank_tol, "numerical rank threshold")
            ->envname("GDSMAP_RANK_TOL");
        cmd->add_option("--samples", opt.samples, "sample count for sweeps and checks")
            ->envname("GDSMAP_SAMPLES");
        cmd->add_option("--format", opt.format, "json or text")
            ->check(CLI::IsMember({"json", "text"}))
            ->envname("GDSMAP_FORMAT");
    };
    for (const char* name : {"classify", "reduce", "verify", "destabilize", "sample-badset"}) {
        add_common(app.add_subcommand(name));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    opt.command = app.get_subcommands().front()->get_name();
    try {
        if (opt.command == "classify") return run_classify(opt);
        if (opt.command == "reduce") return run_reduce(opt);
        if (opt.command == "verify") return run_verify(opt);
        if (opt.command == "destabilize") return run_destabilize(opt);
        if (opt.command == "sample-badset") return run_sample_badset(opt);
    } catch (const gds::BadSetError& err) {
        std::cerr << err.what() << "\n";
        return kExitNegative;
    } catch (const gds::Error& err) {
        std::cerr << err.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitInvalid;
    }
    return kExitInvalid;
}
