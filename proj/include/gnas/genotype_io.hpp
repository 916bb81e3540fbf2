#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gnas/design_space.hpp"
#include "gnas/graph_stats.hpp"

namespace gnas {

using Json = nlohmann::ordered_json;

Json to_json(const FunctionSet& fs);
Json to_json(const Genotype& g);
Json to_json(const GraphStats& s);

FunctionSet function_set_from_json(const Json& j);
Genotype genotype_from_json(const Json& j);
/// Missing fields take their defaults; unknown fields are rejected.
GraphStats graph_stats_from_json(const Json& j);

/// {"positions":[...],"upper":{...},"lower":{...}} on a single line.
std::string genotype_to_string(const Genotype& g);
Genotype parse_genotype(std::string_view text);

}  // namespace gnas
