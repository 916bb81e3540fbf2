#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gnas/config.hpp"
#include "gnas/device_cost.hpp"

namespace gnas {

struct DeviceLabel {
  std::string device;
  double latency_ms = 0.0;
  std::int64_t peak_mem_bytes = 0;
  double energy_mj = 0.0;
};

struct ArchitectureRecord {
  std::string id;
  Genotype genotype;  // canonical
  GraphStats stats;
  std::vector<DeviceLabel> labels;  // in configured device order
};

/// Samples `count` canonical genotypes and labels each with every configured
/// device. Genotypes without measurable work are resampled. Deterministic in
/// (cfg, seed). Throws ConfigError when count < 1.
std::vector<ArchitectureRecord> generate_records(const RunConfig& cfg, std::int64_t count,
                                                 std::uint64_t seed);

Json to_json(const ArchitectureRecord& r, const std::string& config_hash);
ArchitectureRecord architecture_record_from_json(const Json& j);

/// One JSON object per line.
void write_dataset(std::ostream& out, const std::vector<ArchitectureRecord>& records,
                   const std::string& config_hash);

/// Convenience wrapper around generate_records + write_dataset.
void gen_dataset(const RunConfig& cfg, std::int64_t count, std::uint64_t seed,
                 const std::string& path);

/// Reads architecture-record or measurement JSONL into per-device samples.
/// Architecture records split by id so every device of one record lands on
/// the same side. Malformed lines are reported, not fatal, unless more than
/// half of the lines are bad.
LabeledDataset read_labeled_dataset(std::istream& in);
LabeledDataset read_labeled_dataset(const std::string& path);

}  // namespace gnas
