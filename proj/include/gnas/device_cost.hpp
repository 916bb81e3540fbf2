#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gnas/design_space.hpp"
#include "gnas/execution_plan.hpp"
#include "gnas/genotype_io.hpp"
#include "gnas/graph_stats.hpp"

namespace gnas {

/// Synthetic latency/energy model of one device. Coefficients are
/// milliseconds per 10^6 element-operations of the matching kernel.
struct DeviceProfile {
  std::string name;
  double c_knn = 1.0;
  double c_rand = 1.0;
  double c_msg = 1.0;
  double c_broad = 1.0;
  double c_comb = 1.0;
  double c_conn = 1.0;
  double avg_power_w = 1.0;

  void validate() const;
  friend bool operator==(const DeviceProfile&, const DeviceProfile&) = default;
};

/// gpu_like, cpu_like and mcu_like defaults.
std::vector<DeviceProfile> builtin_profiles();
DeviceProfile builtin_profile(const std::string& name);

/// Per-kind latency (ms), indexed by OperationKind.
using KindBreakdown = std::array<double, 4>;

/// Element counts: KNN N^2, random sampling N*K, aggregate 2 x N_e*L_msg
/// (construction + broadcast), combine N*L_in*L_out, skip connect N*L.
/// All scale with the batch size. The genotype is canonicalized first.
double latency(const DeviceProfile& profile, const Genotype& g, const GraphStats& stats);
double latency_of_plan(const DeviceProfile& profile, const ExecutionPlan& plan,
                       const GraphStats& stats);
KindBreakdown latency_by_kind(const DeviceProfile& profile, const ExecutionPlan& plan,
                              const GraphStats& stats);

/// Fractions of latency per operation kind; throws DomainError
/// ("no measurable work") when the latency is zero.
KindBreakdown breakdown(const DeviceProfile& profile, const Genotype& g, const GraphStats& stats);

/// avg_power_w x latency_ms, in millijoules.
double energy(const DeviceProfile& profile, double latency_ms);

/// One measured (or synthesized) label row.
struct MeasurementRecord {
  Genotype genotype;
  GraphStats stats;
  std::string device;
  double latency_ms = 0.0;
  std::int64_t peak_mem_bytes = 0;
  std::optional<double> energy_mj;
  /// Stable identity used for train/validation splitting.
  std::string key;
};

struct RejectedLine {
  std::size_t line_number = 0;  // 1-based
  std::string reason;
};

struct LabeledDataset {
  std::vector<MeasurementRecord> records;
  std::vector<RejectedLine> rejects;
  std::size_t lines_read = 0;
};

Json to_json(const MeasurementRecord& r);
/// Throws FormatError with the violated constraint as message.
MeasurementRecord measurement_from_json(const Json& j);

/// Parses MeasurementRecord JSONL. Malformed lines are collected as rejects;
/// a later record for the same (genotype, device) replaces an earlier one.
/// Throws FormatError when the stream is unreadable or more than half of the
/// non-blank lines are malformed.
LabeledDataset ingest_measurements(std::istream& in);

}  // namespace gnas
