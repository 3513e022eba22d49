#pragma once

#include <json.hpp>

#include <string>

#include "fgddf/canonical.hpp"
#include "fgddf/ddf.hpp"
#include "fgddf/factor_graph.hpp"

namespace fgddf::wire {

using json = nlohmann::json;

json scope_to_json(const Scope& scope);
Scope scope_from_json(const json& j);

/// {"scope":[{"name","dim"}...],"zeta":[...],"lambda_upper":[row-major upper triangle]}
json factor_to_json(const CanonicalFactor& f);
CanonicalFactor factor_from_json(const json& j);

/// {"sender","receiver","step","factors":[...]}
json message_to_json(const FusionMessage& msg);
FusionMessage message_from_json(const json& j);

std::string encode_message(const FusionMessage& msg);
FusionMessage decode_message(const std::string& text);

/// Debug snapshot: variables with dims, factors with id, scope, zeta and full
/// row-major lambda.
json graph_to_json(const FactorGraph& g);
/// Rebuilds a graph from a snapshot. Factors are re-added in id order and get
/// fresh ids.
FactorGraph graph_from_json(const json& j);

}  // namespace fgddf::wire
