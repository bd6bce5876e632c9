#pragma once

#include <nlohmann/json.hpp>

#include "gds/instability.hpp"
#include "gds/instance.hpp"
#include "gds/polymap.hpp"
#include "gds/reduction.hpp"
#include "gds/transform.hpp"
#include "gds/verify.hpp"

namespace gds {

// Insertion-ordered documents keep report bytes stable across runs.
using Json = nlohmann::ordered_json;

Json matrix_json(const Eigen::MatrixXd& m);
Json vector_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const Json& j);
Eigen::VectorXd vector_from_json(const Json& j);

Json to_json(const PolyMap& map);
PolyMap polymap_from_json(const Json& j);

Json to_json(const ElementaryTransform& t);
ElementaryTransform transform_from_json(const Json& j);

Json to_json(const ProblemInstance& inst);
// Accepts "distance-squared" / "lorentzian" in place of the matrix rows.
ProblemInstance instance_from_json(const Json& j);

Json to_json(const BadSetCertificate& cert);
Json to_json(const ReductionTrace& trace);
Json to_json(const ReductionResult& result);

struct ParsedResult {
    NormalFormKind kind = NormalFormKind::WhitneyUmbrella;
    std::vector<ElementaryTransform> source_chain;
    std::vector<ElementaryTransform> target_chain;
    double residual = 0.0;
};
ParsedResult result_from_json(const Json& j);

Json to_json(const InstabilityWitness& w);
Json to_json(const PerturbationSearch& search);
Json to_json(const WitnessCertification& cert);

} // namespace gds
