#include "gnas/device_cost.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

#include "gnas/error.hpp"

namespace gnas {

void DeviceProfile::validate() const {
  if (name.empty()) throw ConfigError("device profile needs a name");
  const std::array<std::pair<const char*, double>, 7> fields{{{"c_knn", c_knn},
                                                              {"c_rand", c_rand},
                                                              {"c_msg", c_msg},
                                                              {"c_broad", c_broad},
                                                              {"c_comb", c_comb},
                                                              {"c_conn", c_conn},
                                                              {"avg_power_w", avg_power_w}}};
  for (const auto& [field, value] : fields) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw ConfigError("device '" + name + "': " + field + " must be > 0");
    }
  }
}

std::vector<DeviceProfile> builtin_profiles() {
  return {
      DeviceProfile{"gpu_like", 5.0, 0.2, 0.3, 0.3, 0.05, 0.02, 150.0},
      DeviceProfile{"cpu_like", 8.0, 0.5, 2.0, 2.0, 0.8, 0.1, 65.0},
      DeviceProfile{"mcu_like", 60.0, 5.0, 15.0, 15.0, 12.0, 1.0, 5.0},
  };
}

DeviceProfile builtin_profile(const std::string& name) {
  for (auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown built-in device profile '" + name + "'");
}

KindBreakdown latency_by_kind(const DeviceProfile& profile, const ExecutionPlan& plan,
                              const GraphStats& stats) {
  const double n = static_cast<double>(stats.num_points);
  const double batch = static_cast<double>(stats.batch_size);
  const double rows = static_cast<double>(stats.node_rows());
  const double edges = static_cast<double>(stats.edge_count());
  constexpr double kMega = 1e6;

  KindBreakdown ms{};
  for (const auto& step : plan.steps) {
    if (!step.active) continue;
    const auto slot = static_cast<std::size_t>(step.kind);
    switch (step.kind) {
      case OperationKind::Sample:
        if (std::get<SampleFn>(step.function) == SampleFn::Knn) {
          ms[slot] += profile.c_knn * batch * n * n / kMega;
        } else {
          ms[slot] += profile.c_rand * edges / kMega;
        }
        break;
      case OperationKind::Aggregate: {
        const double elems = edges * static_cast<double>(step.out_len);
        ms[slot] += (profile.c_msg * elems + profile.c_broad * elems) / kMega;
        break;
      }
      case OperationKind::Combine:
        ms[slot] += profile.c_comb * rows * static_cast<double>(step.in_len) *
                    static_cast<double>(step.out_len) / kMega;
        break;
      case OperationKind::Connect:
        ms[slot] += profile.c_conn * rows * static_cast<double>(step.in_len) / kMega;
        break;
    }
  }
  return ms;
}

double latency_of_plan(const DeviceProfile& profile, const ExecutionPlan& plan,
                       const GraphStats& stats) {
  const auto parts = latency_by_kind(profile, plan, stats);
  return std::accumulate(parts.begin(), parts.end(), 0.0);
}

double latency(const DeviceProfile& profile, const Genotype& g, const GraphStats& stats) {
  stats.validate();
  return latency_of_plan(profile, plan_execution(g, stats.input_feature_dim), stats);
}

KindBreakdown breakdown(const DeviceProfile& profile, const Genotype& g, const GraphStats& stats) {
  stats.validate();
  auto parts = latency_by_kind(profile, plan_execution(g, stats.input_feature_dim), stats);
  const double total = std::accumulate(parts.begin(), parts.end(), 0.0);
  if (!(total > 0.0)) throw DomainError("no measurable work");
  for (auto& p : parts) p /= total;
  return parts;
}

double energy(const DeviceProfile& profile, double latency_ms) {
  return profile.avg_power_w * latency_ms;
}

// --- measurement records ---------------------------------------------------

Json to_json(const MeasurementRecord& r) {
  Json j;
  j["genotype"] = to_json(r.genotype);
  j["stats"] = to_json(r.stats);
  j["device"] = r.device;
  j["latency_ms"] = r.latency_ms;
  j["peak_mem_bytes"] = r.peak_mem_bytes;
  if (r.energy_mj) j["energy_mj"] = *r.energy_mj;
  return j;
}

MeasurementRecord measurement_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "genotype" && key != "stats" && key != "device" && key != "latency_ms" &&
        key != "peak_mem_bytes" && key != "energy_mj") {
      throw FormatError("unknown field '" + key + "'");
    }
  }
  for (const char* key : {"genotype", "stats", "device", "latency_ms", "peak_mem_bytes"}) {
    if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  }
  MeasurementRecord r;
  r.genotype = genotype_from_json(j.at("genotype"));
  r.stats = graph_stats_from_json(j.at("stats"));
  try {
    r.stats.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  if (!j.at("device").is_string()) throw FormatError("device must be a string");
  r.device = j.at("device").get<std::string>();
  if (!j.at("latency_ms").is_number()) throw FormatError("latency_ms must be a number");
  r.latency_ms = j.at("latency_ms").get<double>();
  if (!(r.latency_ms > 0.0) || !std::isfinite(r.latency_ms)) {
    throw FormatError("latency_ms > 0 violated");
  }
  if (!j.at("peak_mem_bytes").is_number_integer()) {
    throw FormatError("peak_mem_bytes must be an integer");
  }
  r.peak_mem_bytes = j.at("peak_mem_bytes").get<std::int64_t>();
  if (r.peak_mem_bytes <= 0) throw FormatError("peak_mem_bytes > 0 violated");
  if (j.contains("energy_mj") && !j.at("energy_mj").is_null()) {
    if (!j.at("energy_mj").is_number()) throw FormatError("energy_mj must be a number");
    r.energy_mj = j.at("energy_mj").get<double>();
  }
  r.key = genotype_to_string(r.genotype) + "@" + r.device;
  return r;
}

LabeledDataset ingest_measurements(std::istream& in) {
  if (!in) throw FormatError("measurement stream is not readable");
  LabeledDataset out;
  std::unordered_map<std::string, std::size_t> slot_of;
  std::string line;
  std::size_t line_no = 0;
  std::size_t non_blank = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++non_blank;
    try {
      Json j;
      try {
        j = Json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what());
      }
      MeasurementRecord r = measurement_from_json(j);
      const auto it = slot_of.find(r.key);
      if (it != slot_of.end()) {
        out.records[it->second] = std::move(r);
      } else {
        slot_of.emplace(r.key, out.records.size());
        out.records.push_back(std::move(r));
      }
    } catch (const Error& e) {
      out.rejects.push_back(RejectedLine{line_no, e.what()});
    }
  }
  if (in.bad()) throw FormatError("measurement stream read failed");
  out.lines_read = non_blank;
  if (non_blank > 0 && out.rejects.size() * 2 > non_blank) {
    throw FormatError("more than half of the measurement lines are malformed (" +
                      std::to_string(out.rejects.size()) + " of " + std::to_string(non_blank) +
                      ")");
  }
  return out;
}

}  // namespace gnas
