#include "gnas/genotype_io.hpp"

#include <set>

#include "gnas/error.hpp"

namespace gnas {

namespace {

void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                         std::string_view what) {
  if (!j.is_object()) throw FormatError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) {
      throw FormatError("unknown field '" + key + "' in " + std::string(what));
    }
  }
}

std::string get_string(const Json& j, const char* key, std::string_view what) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw FormatError(std::string(what) + " needs string field '" + key + "'");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

Json to_json(const FunctionSet& fs) {
  Json j;
  j["connect_fn"] = to_string(fs.connect_fn);
  j["aggregator"] = to_string(fs.aggregator);
  j["message_type"] = to_string(fs.message_type);
  j["combine_dim"] = fs.combine_dim;
  j["sample_fn"] = to_string(fs.sample_fn);
  return j;
}

Json to_json(const Genotype& g) {
  Json positions = Json::array();
  for (const auto& p : g.positions) {
    positions.push_back(p.forced_identity ? std::string("identity")
                                          : std::string(to_string(p.op)));
  }
  Json j;
  j["positions"] = std::move(positions);
  j["upper"] = to_json(g.upper);
  j["lower"] = to_json(g.lower);
  return j;
}

Json to_json(const GraphStats& s) {
  Json j;
  j["num_points"] = s.num_points;
  j["neighbors_per_node"] = s.neighbors_per_node;
  j["input_feature_dim"] = s.input_feature_dim;
  j["batch_size"] = s.batch_size;
  j["weight_precision"] = s.weight_precision;
  j["index_precision"] = s.index_precision;
  return j;
}

FunctionSet function_set_from_json(const Json& j) {
  reject_unknown_keys(j, {"connect_fn", "aggregator", "message_type", "combine_dim", "sample_fn"},
                      "function set");
  FunctionSet fs;
  fs.connect_fn = parse_connect_fn(get_string(j, "connect_fn", "function set"));
  fs.aggregator = parse_aggregator(get_string(j, "aggregator", "function set"));
  fs.message_type = parse_message_type(get_string(j, "message_type", "function set"));
  if (!j.contains("combine_dim") || !j.at("combine_dim").is_number_integer()) {
    throw FormatError("function set needs integer field 'combine_dim'");
  }
  fs.combine_dim = j.at("combine_dim").get<int>();
  fs.sample_fn = parse_sample_fn(get_string(j, "sample_fn", "function set"));
  return fs;
}

Genotype genotype_from_json(const Json& j) {
  reject_unknown_keys(j, {"positions", "upper", "lower"}, "genotype");
  if (!j.contains("positions") || !j.at("positions").is_array()) {
    throw FormatError("genotype needs array field 'positions'");
  }
  if (!j.contains("upper") || !j.contains("lower")) {
    throw FormatError("genotype needs 'upper' and 'lower' function sets");
  }
  Genotype g;
  for (const auto& item : j.at("positions")) {
    if (!item.is_string()) throw FormatError("genotype positions must be strings");
    const auto name = item.get<std::string>();
    if (name == "identity") {
      g.positions.push_back(Position{OperationKind::Connect, true});
    } else {
      g.positions.push_back(Position{parse_operation(name), false});
    }
  }
  g.upper = function_set_from_json(j.at("upper"));
  g.lower = function_set_from_json(j.at("lower"));
  return g;
}

GraphStats graph_stats_from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"num_points", "neighbors_per_node", "input_feature_dim", "batch_size",
                       "weight_precision", "index_precision"},
                      "graph stats");
  GraphStats s;
  auto read = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_integer()) {
      throw FormatError(std::string("graph stats field '") + key + "' must be an integer");
    }
    field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  read("num_points", s.num_points);
  read("neighbors_per_node", s.neighbors_per_node);
  read("input_feature_dim", s.input_feature_dim);
  read("batch_size", s.batch_size);
  read("weight_precision", s.weight_precision);
  read("index_precision", s.index_precision);
  return s;
}

std::string genotype_to_string(const Genotype& g) { return to_json(g).dump(); }

Genotype parse_genotype(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("genotype is not valid JSON: ") + e.what());
  }
  return genotype_from_json(j);
}

}  // namespace gnas
