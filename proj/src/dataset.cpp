#include "gnas/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

#include "gnas/error.hpp"
#include "gnas/mem_model.hpp"
#include "gnas/rng.hpp"

namespace gnas {

namespace {

std::string record_id(std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "arch-%06lld", static_cast<long long>(i));
  return buf;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* what) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw FormatError(std::string("unknown field '") + key + "' in " + what);
  }
}

}  // namespace

std::vector<ArchitectureRecord> generate_records(const RunConfig& cfg, std::int64_t count,
                                                 std::uint64_t seed) {
  if (count < 1) throw ConfigError("count must be >= 1");
  const DesignSpace space(cfg.space);
  cfg.stats.validate();
  const std::uint64_t root = derive_seed(seed, "dataset");

  std::vector<ArchitectureRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    ArchitectureRecord r;
    r.id = record_id(i);
    r.stats = cfg.stats;
    for (std::uint64_t attempt = 0;; ++attempt) {
      const std::uint64_t s = derive_seed(derive_seed(root, static_cast<std::uint64_t>(i)), attempt);
      r.genotype = canonicalize(space.sample(s));
      r.labels.clear();
      bool positive = true;
      const std::int64_t peak = simulate_memory_trace(r.genotype, r.stats).peak;
      for (const auto& d : cfg.devices) {
        const double lat = latency(d, r.genotype, r.stats);
        positive = positive && lat > 0.0;
        r.labels.push_back(DeviceLabel{d.name, lat, peak, energy(d, lat)});
      }
      if (positive && peak > 0) break;
      if (attempt > 1000) throw DomainError("could not sample a genotype with measurable work");
    }
    out.push_back(std::move(r));
  }
  return out;
}

Json to_json(const ArchitectureRecord& r, const std::string& config_hash) {
  Json j;
  j["id"] = r.id;
  j["genotype"] = to_json(r.genotype);
  j["stats"] = to_json(r.stats);
  Json labels;
  for (const auto& l : r.labels) {
    labels[l.device] = {{"latency_ms", l.latency_ms},
                        {"peak_mem_bytes", l.peak_mem_bytes},
                        {"energy_mj", l.energy_mj}};
  }
  j["labels"] = std::move(labels);
  j["config_hash"] = config_hash;
  j["tool_version"] = kToolVersion;
  return j;
}

ArchitectureRecord architecture_record_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  check_keys(j, {"id", "genotype", "stats", "labels", "config_hash", "tool_version"},
             "architecture record");
  for (const char* key : {"id", "genotype", "stats", "labels"}) {
    if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  }
  ArchitectureRecord r;
  if (!j.at("id").is_string()) throw FormatError("id must be a string");
  r.id = j.at("id").get<std::string>();
  r.genotype = genotype_from_json(j.at("genotype"));
  r.stats = graph_stats_from_json(j.at("stats"));
  try {
    r.stats.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  const Json& labels = j.at("labels");
  if (!labels.is_object() || labels.empty()) throw FormatError("labels must be a non-empty object");
  for (const auto& [device, l] : labels.items()) {
    if (!l.is_object()) throw FormatError("label for '" + device + "' must be an object");
    check_keys(l, {"latency_ms", "peak_mem_bytes", "energy_mj"}, "label");
    DeviceLabel d;
    d.device = device;
    if (!l.contains("latency_ms") || !l.at("latency_ms").is_number()) {
      throw FormatError("latency_ms must be a number");
    }
    d.latency_ms = l.at("latency_ms").get<double>();
    if (!(d.latency_ms > 0.0) || !std::isfinite(d.latency_ms)) {
      throw FormatError("latency_ms > 0 violated");
    }
    if (!l.contains("peak_mem_bytes") || !l.at("peak_mem_bytes").is_number_integer()) {
      throw FormatError("peak_mem_bytes must be an integer");
    }
    d.peak_mem_bytes = l.at("peak_mem_bytes").get<std::int64_t>();
    if (d.peak_mem_bytes <= 0) throw FormatError("peak_mem_bytes > 0 violated");
    if (l.contains("energy_mj")) {
      if (!l.at("energy_mj").is_number()) throw FormatError("energy_mj must be a number");
      d.energy_mj = l.at("energy_mj").get<double>();
      if (!(d.energy_mj > 0.0)) throw FormatError("energy_mj > 0 violated");
    }
    r.labels.push_back(std::move(d));
  }
  return r;
}

void write_dataset(std::ostream& out, const std::vector<ArchitectureRecord>& records,
                   const std::string& config_hash) {
  for (const auto& r : records) out << to_json(r, config_hash).dump() << '\n';
  if (!out) throw FormatError("failed to write dataset");
}

void gen_dataset(const RunConfig& cfg, std::int64_t count, std::uint64_t seed,
                 const std::string& path) {
  const auto records = generate_records(cfg, count, seed);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_dataset(out, records, config_hash(cfg));
}

LabeledDataset read_labeled_dataset(std::istream& in) {
  if (!in) throw FormatError("dataset stream is not readable");
  LabeledDataset out;
  std::unordered_map<std::string, std::size_t> slot_of;
  std::set<std::string> ids;
  auto add = [&](MeasurementRecord r) {
    const std::string slot = r.key + "|" + r.device;
    const auto it = slot_of.find(slot);
    if (it != slot_of.end()) {
      out.records[it->second] = std::move(r);
    } else {
      slot_of.emplace(slot, out.records.size());
      out.records.push_back(std::move(r));
    }
  };

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
      if (j.is_object() && j.contains("labels")) {
        ArchitectureRecord a = architecture_record_from_json(j);
        if (!ids.insert(a.id).second) throw FormatError("duplicate id '" + a.id + "'");
        for (const auto& l : a.labels) {
          MeasurementRecord m;
          m.genotype = a.genotype;
          m.stats = a.stats;
          m.device = l.device;
          m.latency_ms = l.latency_ms;
          m.peak_mem_bytes = l.peak_mem_bytes;
          m.energy_mj = l.energy_mj;
          m.key = a.id;
          add(std::move(m));
        }
      } else {
        add(measurement_from_json(j));
      }
    } catch (const Error& e) {
      out.rejects.push_back(RejectedLine{line_no, e.what()});
    } catch (const nlohmann::json::exception& e) {
      out.rejects.push_back(RejectedLine{line_no, e.what()});
    }
  }
  if (in.bad()) throw FormatError("dataset read failed");
  out.lines_read = non_blank;
  if (non_blank > 0 && out.rejects.size() * 2 > non_blank) {
    throw FormatError("more than half of the dataset lines are malformed (" +
                      std::to_string(out.rejects.size()) + " of " + std::to_string(non_blank) +
                      ")");
  }
  return out;
}

LabeledDataset read_labeled_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset '" + path + "'");
  return read_labeled_dataset(in);
}

}  // namespace gnas
