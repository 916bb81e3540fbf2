#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnas/design_space.hpp"
#include "gnas/genotype_io.hpp"
#include "gnas/graph_stats.hpp"

namespace gnas {

/// One executed operation in a memory trace. `transient_peak` is the highest
/// live total reached while the operation ran (the message-construction total
/// for aggregates, the post-op total otherwise).
struct MemoryStep {
  int position = -1;  // -1: implicit initial sample
  std::string label;
  std::int64_t bytes_delta = 0;
  std::int64_t running_total = 0;
  std::int64_t transient_peak = 0;
};

struct MemoryTrace {
  std::vector<MemoryStep> steps;
  std::int64_t parameter_bytes = 0;  // M_p
  std::int64_t data_bytes = 0;       // M_d
  std::int64_t base = 0;             // M_p + M_d
  std::int64_t peak = 0;             // PM
  std::vector<std::int64_t> message_construction_peaks;  // one M_mc per aggregate

  std::int64_t final_total() const { return steps.empty() ? base : steps.back().running_total; }
};

/// Closed-form peak estimate with the index-precision share of the peak.
struct PeakEstimate {
  std::int64_t peak = 0;
  std::int64_t index_bytes_at_peak = 0;
  /// Aggregate ordinal whose message construction sets the peak, or -1 when
  /// the final total does.
  int peak_checkpoint = -1;
};

/// Peak bytes of a forward pass. The genotype is canonicalized first.
/// Sample adds N_e*2*U_index; Aggregate peaks at M + N_e*L_msg*U_k and keeps
/// N*L_msg*U_k; Combine adds N*L_out*U_k; an effective skip connect adds
/// N*L*U_k. The result is max(final total, every message-construction total).
std::int64_t estimate_peak_memory(const Genotype& g, const GraphStats& stats);
PeakEstimate estimate_peak_memory_detail(const Genotype& g, const GraphStats& stats);

/// Replays the forward pass against an explicit allocator. Independent of the
/// closed-form path; its peak must equal `estimate_peak_memory` exactly.
MemoryTrace simulate_memory_trace(const Genotype& g, const GraphStats& stats);

/// The estimate is a floor under (possibly biased) predictions.
double robust_peak_memory(double predicted, double estimated);

Json memory_trace_to_json(const MemoryTrace& trace);

}  // namespace gnas
