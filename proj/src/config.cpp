#include "gnas/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gnas/error.hpp"
#include "gnas/rng.hpp"

namespace gnas {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Reads one section, remembering which keys were consumed.
class Section {
 public:
  Section(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(tree) {
    for (const auto& [key, child] : tree_) {
      if (!child.empty()) throw ConfigError("[" + name_ + "] nests a section under '" + key + "'");
    }
  }

  std::optional<std::string> raw(const std::string& key) {
    const auto it = tree_.find(key);
    if (it == tree_.not_found()) return std::nullopt;
    used_.insert(key);
    return trim(it->second.data());
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (auto v = raw(key)) out = convert<T>(key, *v);
  }

  template <typename T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    if (auto v = raw(key)) {
      if (*v == "auto") {
        out.reset();
      } else {
        out = convert<T>(key, *v);
      }
    }
  }

  template <typename T, typename Parse>
  void read_list(const std::string& key, std::vector<T>& out, Parse parse) {
    if (auto v = raw(key)) {
      out.clear();
      for (const auto& item : split_list(*v)) {
        try {
          out.push_back(parse(item));
        } catch (const Error& e) {
          throw ConfigError(where(key) + ": " + e.what());
        }
      }
    }
  }

  void read_dims(const std::string& key, std::array<int, 3>& out) {
    std::vector<int> dims;
    read_list(key, dims, [&](const std::string& s) { return convert<int>(key, s); });
    if (raw(key)) {
      if (dims.size() != 3) throw ConfigError(where(key) + " needs exactly three entries");
      std::copy(dims.begin(), dims.end(), out.begin());
    }
  }

  /// Any key that was never consumed is a typo or an unsupported option.
  void finish() const {
    for (const auto& [key, _] : tree_) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + key + "' in [" + name_ + "]");
    }
  }

 private:
  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  template <typename T>
  T convert(const std::string& key, const std::string& v) const {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, double>) {
      char* end = nullptr;
      const double d = std::strtod(v.c_str(), &end);
      if (v.empty() || end != v.c_str() + v.size() || std::isnan(d)) {
        throw ConfigError(where(key) + ": '" + v + "' is not a number");
      }
      return d;
    } else {
      T out{};
      const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
      if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError(where(key) + ": '" + v + "' is not an integer");
      }
      return out;
    }
  }

  std::string name_;
  const pt::ptree& tree_;
  std::set<std::string> used_;
};

void read_space(Section& s, SpaceConfig& space) {
  s.read("num_positions", space.num_positions);
  auto& t = space.tables;
  s.read_list("connect", t.connect, [](const std::string& v) { return parse_connect_fn(v); });
  s.read_list("aggregator", t.aggregators,
              [](const std::string& v) { return parse_aggregator(v); });
  s.read_list("message_type", t.messages,
              [](const std::string& v) { return parse_message_type(v); });
  s.read_list("combine_dim", t.combine_dims, [](const std::string& v) {
    int d = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), d);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
      throw ConfigError("'" + v + "' is not an integer");
    }
    return d;
  });
  s.read_list("sample", t.samples, [](const std::string& v) { return parse_sample_fn(v); });
}

void read_graph(Section& s, GraphStats& g) {
  s.read("num_points", g.num_points);
  s.read("neighbors_per_node", g.neighbors_per_node);
  s.read("input_feature_dim", g.input_feature_dim);
  s.read("batch_size", g.batch_size);
  s.read("weight_precision", g.weight_precision);
  s.read("index_precision", g.index_precision);
}

void read_device(Section& s, DeviceProfile& d, bool builtin) {
  const std::pair<const char*, double*> fields[] = {
      {"c_knn", &d.c_knn},   {"c_rand", &d.c_rand}, {"c_msg", &d.c_msg},
      {"c_broad", &d.c_broad}, {"c_comb", &d.c_comb}, {"c_conn", &d.c_conn},
      {"avg_power_w", &d.avg_power_w}};
  for (const auto& [key, slot] : fields) {
    if (!s.raw(key) && !builtin) {
      throw ConfigError("device '" + d.name + "' is missing '" + key + "'");
    }
    s.read(key, *slot);
  }
}

void read_predictor(Section& s, PredictorConfig& p, bool& devices_given) {
  s.read_dims("gcn_dims", p.gcn_dims);
  s.read_dims("mlp_dims", p.mlp_dims);
  if (s.raw("devices")) {
    devices_given = true;
    s.read_list("devices", p.devices, [](const std::string& v) { return v; });
  }
  s.read("leaky_slope", p.leaky_slope);
  std::string readout = std::string(to_string(p.readout));
  s.read("readout", readout);
  p.readout = parse_readout(readout);
}

void read_train(Section& s, TrainConfig& t, TrainConfig& m) {
  s.read("epochs", t.epochs);
  s.read("batch_size", t.batch_size);
  s.read("learning_rate", t.learning_rate);
  s.read("weight_decay", t.weight_decay);
  s.read("plateau_factor", t.plateau_factor);
  s.read("plateau_patience", t.plateau_patience);
  s.read("split_fraction", t.split_fraction);
  const TrainConfig mem_defaults = TrainConfig::for_memory();
  m = t;
  m.batch_size = mem_defaults.batch_size;
  m.learning_rate = mem_defaults.learning_rate;
  s.read("memory_batch_size", m.batch_size);
  s.read("memory_learning_rate", m.learning_rate);
}

void read_search(Section& s, RunConfig& cfg) {
  SearchConfig& c = cfg.search;
  s.read("alpha", c.alpha);
  s.read("beta", c.beta);
  s.read("c_lat_ms", c.constraints.c_lat_ms);
  s.read("c_mem_bytes", c.constraints.c_mem_bytes);
  s.read("population", c.population);
  s.read("max_iterations", c.max_iterations);
  s.read_optional("stage1_iterations", c.stage1_iterations);
  s.read_optional("stage2_iterations", c.stage2_iterations);
  s.read("stage1_samples", c.stage1_samples);
  s.read("mutation_rate", c.mutation_rate);
  s.read("crossover_rate", c.crossover_rate);
  s.read("elite_count", c.elite_count);
  s.read("device", c.device);
  std::string hw = std::string(to_string(c.hw_eval));
  s.read("hw_eval", hw);
  c.hw_eval = parse_hw_eval(hw);
  s.read("accuracy", c.accuracy_eval);
  s.read_optional("lat_ref_ms", c.lat_ref_ms);
  s.read_optional("mem_ref_bytes", c.mem_ref_bytes);
  s.read("latency_weights", cfg.latency_weights);
  s.read("memory_weights", cfg.memory_weights);
}

std::vector<std::string> device_names(const std::vector<DeviceProfile>& devices) {
  std::vector<std::string> names;
  for (const auto& d : devices) names.push_back(d.name);
  return names;
}

Json bound(double v) { return std::isfinite(v) ? Json(v) : Json("inf"); }

}  // namespace

const DeviceProfile& RunConfig::device(const std::string& name) const {
  for (const auto& d : devices) {
    if (d.name == name) return d;
  }
  throw ConfigError("unknown device '" + name + "'");
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  memory_train.seed = s;
  search.seed = s;
}

void RunConfig::validate() const {
  DesignSpace check(space);
  (void)check;
  stats.validate();
  if (stats.input_feature_dim != space.input_feature_dim) {
    throw ConfigError("space and graph disagree on input_feature_dim");
  }
  if (devices.empty()) throw ConfigError("at least one device is required");
  std::set<std::string> seen;
  for (const auto& d : devices) {
    d.validate();
    if (!seen.insert(d.name).second) throw ConfigError("duplicate device '" + d.name + "'");
  }
  predictor.validate();
  for (const auto& name : predictor.devices) device(name);
  train.validate();
  memory_train.validate();
  search.validate();
  device(search.device);
  make_accuracy_evaluator(search.accuracy_eval);
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.predictor.devices = device_names(cfg.devices);
  cfg.search.stats = cfg.stats;
  return cfg;
}

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }

  RunConfig cfg;
  std::vector<DeviceProfile> custom_devices;
  bool devices_given = false;
  for (const auto& [name, child] : tree) {
    if (child.empty()) {
      if (name != "seed") throw ConfigError("unknown top-level key '" + name + "'");
      const std::string v = trim(child.data());
      const auto res = std::from_chars(v.data(), v.data() + v.size(), cfg.seed);
      if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw ConfigError("seed: '" + v + "' is not an unsigned integer");
      }
      continue;
    }
    Section s(name, child);
    if (name == "space") {
      read_space(s, cfg.space);
    } else if (name == "graph") {
      read_graph(s, cfg.stats);
    } else if (name.rfind("devices.", 0) == 0 && name.size() > 8) {
      DeviceProfile d;
      d.name = name.substr(8);
      bool builtin = false;
      for (const auto& b : builtin_profiles()) {
        if (b.name == d.name) {
          d = b;
          builtin = true;
        }
      }
      read_device(s, d, builtin);
      custom_devices.push_back(std::move(d));
    } else if (name == "predictor") {
      read_predictor(s, cfg.predictor, devices_given);
    } else if (name == "train") {
      read_train(s, cfg.train, cfg.memory_train);
    } else if (name == "search") {
      read_search(s, cfg);
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
    s.finish();
  }

  if (!custom_devices.empty()) cfg.devices = std::move(custom_devices);
  if (!devices_given) cfg.predictor.devices = device_names(cfg.devices);
  cfg.space.input_feature_dim = cfg.stats.input_feature_dim;
  cfg.search.stats = cfg.stats;
  cfg.set_seed(cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

Json to_json(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;

  Json space;
  const auto& t = cfg.space.tables;
  space["num_positions"] = cfg.space.num_positions;
  Json list = Json::array();
  for (auto v : t.connect) list.push_back(to_string(v));
  space["connect"] = list;
  list = Json::array();
  for (auto v : t.aggregators) list.push_back(to_string(v));
  space["aggregator"] = list;
  list = Json::array();
  for (auto v : t.messages) list.push_back(to_string(v));
  space["message_type"] = list;
  space["combine_dim"] = t.combine_dims;
  list = Json::array();
  for (auto v : t.samples) list.push_back(to_string(v));
  space["sample"] = list;
  j["space"] = std::move(space);

  j["graph"] = to_json(cfg.stats);

  Json devices;
  for (const auto& d : cfg.devices) {
    devices[d.name] = {{"c_knn", d.c_knn},     {"c_rand", d.c_rand}, {"c_msg", d.c_msg},
                       {"c_broad", d.c_broad}, {"c_comb", d.c_comb}, {"c_conn", d.c_conn},
                       {"avg_power_w", d.avg_power_w}};
  }
  j["devices"] = std::move(devices);

  j["predictor"] = to_json(cfg.predictor);

  const auto& tr = cfg.train;
  j["train"] = {{"epochs", tr.epochs},
                {"batch_size", tr.batch_size},
                {"learning_rate", tr.learning_rate},
                {"weight_decay", tr.weight_decay},
                {"plateau_factor", tr.plateau_factor},
                {"plateau_patience", tr.plateau_patience},
                {"split_fraction", tr.split_fraction},
                {"memory_batch_size", cfg.memory_train.batch_size},
                {"memory_learning_rate", cfg.memory_train.learning_rate}};

  Json search = to_json(cfg.search);
  search["c_lat_ms"] = bound(cfg.search.constraints.c_lat_ms);
  search["c_mem_bytes"] = bound(cfg.search.constraints.c_mem_bytes);
  search["latency_weights"] = cfg.latency_weights;
  search["memory_weights"] = cfg.memory_weights;
  j["search"] = std::move(search);
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
  return buf;
}

}  // namespace gnas
