#include "gnas/mem_model.hpp"

#include <algorithm>
#include <map>

#include "gnas/error.hpp"
#include "gnas/execution_plan.hpp"

namespace gnas {

PeakEstimate estimate_peak_memory_detail(const Genotype& g, const GraphStats& stats) {
  stats.validate();
  const ExecutionPlan plan = plan_execution(g, stats.input_feature_dim);
  const std::int64_t uk = stats.weight_precision;
  const std::int64_t ui = stats.index_precision;
  const std::int64_t rows = stats.node_rows();
  const std::int64_t edges = stats.edge_count();

  std::int64_t total = uk * parameter_count(plan) + rows * stats.input_feature_dim * uk;
  std::int64_t index_bytes = 0;
  PeakEstimate best;
  int aggregate_ordinal = 0;

  for (const auto& step : plan.steps) {
    if (!step.active) continue;
    switch (step.kind) {
      case OperationKind::Sample: {
        const std::int64_t edge_list = edges * 2 * ui;
        total += edge_list;
        index_bytes += edge_list;
        break;
      }
      case OperationKind::Aggregate: {
        const std::int64_t construction = total + edges * step.out_len * uk;
        if (construction > best.peak) {
          best = PeakEstimate{construction, index_bytes, aggregate_ordinal};
        }
        ++aggregate_ordinal;
        total += rows * step.out_len * uk;
        break;
      }
      case OperationKind::Combine:
        total += rows * step.out_len * uk;
        break;
      case OperationKind::Connect:
        total += rows * step.out_len * uk;
        break;
    }
  }
  if (total >= best.peak) best = PeakEstimate{total, index_bytes, -1};
  return best;
}

std::int64_t estimate_peak_memory(const Genotype& g, const GraphStats& stats) {
  return estimate_peak_memory_detail(g, stats).peak;
}

namespace {

/// Live-set bookkeeping with a high-water mark.
class Allocator {
 public:
  int allocate(std::int64_t bytes) {
    const int id = next_id_++;
    live_.emplace(id, bytes);
    total_ += bytes;
    high_water_ = std::max(high_water_, total_);
    return id;
  }

  void release(int id) {
    const auto it = live_.find(id);
    if (it == live_.end()) throw DomainError("double free in memory simulation");
    total_ -= it->second;
    live_.erase(it);
  }

  std::int64_t total() const { return total_; }
  std::int64_t high_water() const { return high_water_; }
  void reset_high_water() { high_water_ = total_; }

 private:
  std::map<int, std::int64_t> live_;
  std::int64_t total_ = 0;
  std::int64_t high_water_ = 0;
  int next_id_ = 0;
};

struct FeatureTensor {
  std::int64_t width;
};

std::string describe(const Genotype& g, std::size_t i) {
  const FunctionChoice fn = g.function_at(i);
  std::string label(to_string(g.positions[i].op));
  switch (g.positions[i].op) {
    case OperationKind::Connect:
      label += "(" + std::string(to_string(std::get<ConnectFn>(fn))) + ")";
      break;
    case OperationKind::Aggregate: {
      const auto& a = std::get<AggregateFn>(fn);
      label += "(" + std::string(to_string(a.aggregator)) + ", " +
               std::string(to_string(a.message)) + ")";
      break;
    }
    case OperationKind::Combine:
      label += "(" + std::to_string(std::get<CombineFn>(fn).dim) + ")";
      break;
    case OperationKind::Sample:
      label += "(" + std::string(to_string(std::get<SampleFn>(fn))) + ")";
      break;
  }
  return label;
}

std::int64_t msg_width(MessageType t, std::int64_t w) {
  switch (t) {
    case MessageType::SourceConcatRelative:
    case MessageType::TargetConcatRelative:
      return 2 * w;
    case MessageType::EuclideanDistance:
      return 1;
    case MessageType::Full:
      return 3 * w;
    default:
      return w;
  }
}

bool has_partner(const std::vector<FeatureTensor>& features, std::int64_t width) {
  // Every tensor except the current (last) one is a candidate.
  for (std::size_t i = 0; i + 1 < features.size(); ++i) {
    if (features[i].width == width) return true;
  }
  return false;
}

}  // namespace

MemoryTrace simulate_memory_trace(const Genotype& g, const GraphStats& stats) {
  stats.validate();
  const Genotype net = canonicalize(g);
  const std::int64_t uk = stats.weight_precision;
  const std::int64_t ui = stats.index_precision;
  const std::int64_t rows = stats.node_rows();
  const std::int64_t edges = stats.edge_count();

  // Load the model: one weight matrix and bias per Combine, sized by the
  // feature width reaching it.
  std::int64_t weight_elems = 0;
  {
    std::vector<FeatureTensor> widths{{stats.input_feature_dim}};
    for (std::size_t i = 0; i < net.size(); ++i) {
      const std::int64_t w = widths.back().width;
      const FunctionChoice fn = net.function_at(i);
      switch (net.positions[i].op) {
        case OperationKind::Aggregate:
          widths.push_back({msg_width(std::get<AggregateFn>(fn).message, w)});
          break;
        case OperationKind::Combine: {
          const std::int64_t out = std::get<CombineFn>(fn).dim;
          weight_elems += w * out + out;
          widths.push_back({out});
          break;
        }
        case OperationKind::Connect:
          if (std::get<ConnectFn>(fn) == ConnectFn::SkipConnect && has_partner(widths, w)) {
            widths.push_back({w});
          }
          break;
        case OperationKind::Sample:
          break;
      }
    }
  }

  MemoryTrace trace;
  Allocator heap;
  trace.parameter_bytes = weight_elems * uk;
  trace.data_bytes = rows * stats.input_feature_dim * uk;
  heap.allocate(trace.parameter_bytes);
  heap.allocate(trace.data_bytes);
  trace.base = heap.total();

  std::vector<FeatureTensor> features{{stats.input_feature_dim}};
  bool graph = false;
  std::int64_t peak = heap.total();

  auto record = [&](int position, std::string label, std::int64_t before) {
    trace.steps.push_back(MemoryStep{position, std::move(label), heap.total() - before,
                                     heap.total(), heap.high_water()});
    peak = std::max(peak, heap.high_water());
    heap.reset_high_water();
  };

  for (std::size_t i = 0; i < net.size(); ++i) {
    const Position& pos = net.positions[i];
    const FunctionChoice fn = net.function_at(i);
    const std::int64_t width = features.back().width;

    if (pos.op == OperationKind::Aggregate && !graph) {
      const std::int64_t before = heap.total();
      heap.allocate(edges * 2 * ui);
      graph = true;
      record(-1, "sample(knn, implicit)", before);
    }

    const std::int64_t before = heap.total();
    heap.reset_high_water();
    switch (pos.op) {
      case OperationKind::Sample:
        heap.allocate(edges * 2 * ui);
        graph = true;
        break;
      case OperationKind::Aggregate: {
        const std::int64_t out = msg_width(std::get<AggregateFn>(fn).message, width);
        const int messages = heap.allocate(edges * out * uk);
        trace.message_construction_peaks.push_back(heap.total());
        // Broadcasting reduces the per-edge messages into node rows; the
        // message buffer is recycled as the node tensor materializes.
        heap.release(messages);
        heap.allocate(rows * out * uk);
        features.push_back({out});
        break;
      }
      case OperationKind::Combine: {
        const std::int64_t out = std::get<CombineFn>(fn).dim;
        heap.allocate(rows * out * uk);
        features.push_back({out});
        break;
      }
      case OperationKind::Connect:
        if (std::get<ConnectFn>(fn) == ConnectFn::SkipConnect && has_partner(features, width)) {
          heap.allocate(rows * width * uk);
          features.push_back({width});
        }
        break;
    }
    record(static_cast<int>(i), describe(net, i), before);
  }

  trace.peak = peak;
  return trace;
}

double robust_peak_memory(double predicted, double estimated) {
  return std::max(predicted, estimated);
}

Json memory_trace_to_json(const MemoryTrace& trace) {
  Json steps = Json::array();
  for (const auto& s : trace.steps) {
    Json j;
    j["position"] = s.position;
    j["label"] = s.label;
    j["bytes_delta"] = s.bytes_delta;
    j["running_total"] = s.running_total;
    j["transient_peak"] = s.transient_peak;
    steps.push_back(std::move(j));
  }
  Json j;
  j["base"] = trace.base;
  j["parameter_bytes"] = trace.parameter_bytes;
  j["data_bytes"] = trace.data_bytes;
  j["peak"] = trace.peak;
  j["message_construction_peaks"] = trace.message_construction_peaks;
  j["steps"] = std::move(steps);
  return j;
}

}  // namespace gnas
