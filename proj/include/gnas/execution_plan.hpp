#pragma once

#include <cstdint>
#include <vector>

#include "gnas/design_space.hpp"

namespace gnas {

/// Per-edge message width for a given input feature length.
std::int64_t message_length(MessageType type, std::int64_t feature_len);

/// One executed operation of a canonical genotype with its resolved
/// feature widths.
struct ExecStep {
  int position = -1;  // -1 marks the implicit initial KNN sample
  OperationKind kind = OperationKind::Connect;
  FunctionChoice function = ConnectFn::Identity;
  std::int64_t in_len = 0;
  std::int64_t out_len = 0;
  /// False for steps that do no work: Identity connects and skip connects
  /// without an earlier tensor of equal width.
  bool active = true;
};

/// Where a plan starts. The default is a fresh network on the input features.
struct PlanContext {
  std::int64_t feature_len = 0;
  bool graph_ready = false;
  /// Widths of feature tensors produced before the current one.
  std::vector<std::int64_t> earlier_lengths;
};

struct ExecutionPlan {
  std::int64_t input_len = 0;
  bool implicit_sample = false;
  std::vector<ExecStep> steps;
  std::int64_t output_len = 0;
  /// State after the last step; feed it to a follow-up plan to chain.
  PlanContext exit;
};

/// Resolves the execution order of a genotype (canonicalized first).
ExecutionPlan plan_execution(const Genotype& g, std::int64_t input_feature_dim);
ExecutionPlan plan_execution(const Genotype& g, const PlanContext& entry);

/// Parameters of the finalized network: each Combine holds a weight matrix
/// and bias; alignment transforms used during supernet training are gone.
std::int64_t parameter_count(const ExecutionPlan& plan);

}  // namespace gnas
