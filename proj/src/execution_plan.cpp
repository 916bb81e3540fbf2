#include "gnas/execution_plan.hpp"

#include <algorithm>

namespace gnas {

std::int64_t message_length(MessageType type, std::int64_t feature_len) {
  switch (type) {
    case MessageType::SourcePos:
    case MessageType::TargetPos:
    case MessageType::RelativePos:
      return feature_len;
    case MessageType::SourceConcatRelative:
    case MessageType::TargetConcatRelative:
      return 2 * feature_len;
    case MessageType::EuclideanDistance:
      return 1;
    case MessageType::Full:
      return 3 * feature_len;
  }
  return feature_len;
}

ExecutionPlan plan_execution(const Genotype& g, std::int64_t input_feature_dim) {
  return plan_execution(g, PlanContext{input_feature_dim, false, {}});
}

ExecutionPlan plan_execution(const Genotype& g, const PlanContext& entry) {
  const Genotype canon = canonicalize(g);
  ExecutionPlan plan;
  plan.input_len = entry.feature_len;

  std::int64_t len = entry.feature_len;
  bool graph = entry.graph_ready;
  std::vector<std::int64_t> earlier = entry.earlier_lengths;

  if (!graph && needs_implicit_sample(canon)) {
    plan.implicit_sample = true;
    plan.steps.push_back(ExecStep{-1, OperationKind::Sample, SampleFn::Knn, len, len, true});
    graph = true;
  }

  for (std::size_t i = 0; i < canon.size(); ++i) {
    ExecStep step;
    step.position = static_cast<int>(i);
    step.kind = canon.positions[i].op;
    step.function = canon.function_at(i);
    step.in_len = len;
    switch (step.kind) {
      case OperationKind::Sample:
        graph = true;
        step.out_len = len;
        break;
      case OperationKind::Aggregate: {
        const auto& fn = std::get<AggregateFn>(step.function);
        step.out_len = message_length(fn.message, len);
        earlier.push_back(len);
        len = step.out_len;
        break;
      }
      case OperationKind::Combine:
        step.out_len = std::get<CombineFn>(step.function).dim;
        earlier.push_back(len);
        len = step.out_len;
        break;
      case OperationKind::Connect: {
        step.out_len = len;
        const bool skip = std::get<ConnectFn>(step.function) == ConnectFn::SkipConnect;
        const bool partner =
            std::find(earlier.begin(), earlier.end(), len) != earlier.end();
        step.active = skip && partner;
        if (step.active) earlier.push_back(len);
        break;
      }
    }
    plan.steps.push_back(step);
  }
  plan.output_len = len;
  plan.exit = PlanContext{len, graph, std::move(earlier)};
  return plan;
}

std::int64_t parameter_count(const ExecutionPlan& plan) {
  std::int64_t params = 0;
  for (const auto& s : plan.steps) {
    if (s.kind == OperationKind::Combine) params += s.in_len * s.out_len + s.out_len;
  }
  return params;
}

}  // namespace gnas
