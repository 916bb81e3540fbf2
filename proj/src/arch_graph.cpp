#include "gnas/arch_graph.hpp"

#include <algorithm>
#include <cmath>

#include "gnas/error.hpp"

namespace gnas {

void GraphStats::validate() const {
  auto count = [](std::int64_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  count(num_points, "num_points");
  count(neighbors_per_node, "neighbors_per_node");
  count(input_feature_dim, "input_feature_dim");
  count(batch_size, "batch_size");
  auto precision = [](int v, const char* name) {
    if (v != 2 && v != 4 && v != 8) throw ConfigError(std::string(name) + " must be 2, 4 or 8");
  };
  precision(weight_precision, "weight_precision");
  precision(index_precision, "index_precision");
}

namespace {

constexpr int kRoleConnect = 3;
constexpr int kSlotAggregator = kRoleWidth + 0;
constexpr int kSlotMessage = kRoleWidth + 4;
constexpr int kSlotCombine = kRoleWidth + 5;
constexpr int kSlotSkip = kRoleWidth + 6;
constexpr int kSlotKnn = kRoleWidth + 7;

double unit_clamp(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Input:
      return "input";
    case NodeRole::Output:
      return "output";
    case NodeRole::Global:
      return "global";
    case NodeRole::Operation:
      return "operation";
  }
  return "?";
}

FeatureVector encode_position(OperationKind op, const FunctionChoice& fn) {
  if (kind_of(fn) != op) {
    throw ConfigError("function does not belong to operation '" + std::string(to_string(op)) +
                      "'");
  }
  FeatureVector v{};
  v[kRoleConnect + static_cast<int>(op)] = 1.0;
  switch (op) {
    case OperationKind::Connect:
      v[kSlotSkip] = std::get<ConnectFn>(fn) == ConnectFn::SkipConnect ? 1.0 : 0.0;
      break;
    case OperationKind::Aggregate: {
      const auto& agg = std::get<AggregateFn>(fn);
      v[kSlotAggregator + static_cast<int>(agg.aggregator)] = 1.0;
      v[kSlotMessage] = static_cast<double>(agg.message) / 6.0;
      break;
    }
    case OperationKind::Combine:
      v[kSlotCombine] = std::log2(static_cast<double>(std::get<CombineFn>(fn).dim)) / 8.0;
      break;
    case OperationKind::Sample:
      v[kSlotKnn] = std::get<SampleFn>(fn) == SampleFn::Knn ? 1.0 : 0.0;
      break;
  }
  return v;
}

FeatureVector global_features(const GraphStats& stats) {
  const double n = static_cast<double>(stats.num_points);
  const double k = static_cast<double>(stats.neighbors_per_node);
  FeatureVector v{};
  v[0] = unit_clamp(std::log2(n) / 16.0);
  v[1] = unit_clamp(k / 64.0);
  v[2] = unit_clamp(std::log2(static_cast<double>(stats.input_feature_dim) + 1.0) / 8.0);
  v[3] = unit_clamp(static_cast<double>(stats.batch_size) / 64.0);
  v[4] = unit_clamp(k / std::max(n - 1.0, 1.0));
  v[5] = unit_clamp(stats.weight_precision / 8.0);
  v[6] = unit_clamp(stats.index_precision / 8.0);
  return v;
}

Eigen::Index ArchGraph::global_index() const {
  const auto it = std::find(roles.begin(), roles.end(), NodeRole::Global);
  if (it == roles.end()) throw DomainError("architecture graph has no global node");
  return static_cast<Eigen::Index>(it - roles.begin());
}

ArchGraph build_arch_graph(const Genotype& g, const GraphStats& stats) {
  stats.validate();
  if (g.positions.empty()) throw ConfigError("genotype has no positions");
  for (const auto& p : g.positions) {
    if (p.forced_identity && p.op != OperationKind::Connect) {
      throw ConfigError("invalid genotype: forced identity on a non-connect operation");
    }
  }
  const auto n_ops = static_cast<Eigen::Index>(g.size());
  const Eigen::Index m = n_ops + 3;
  const Eigen::Index input = 0;
  const Eigen::Index output = n_ops + 1;
  const Eigen::Index global = n_ops + 2;

  ArchGraph ag;
  ag.adjacency = Eigen::MatrixXd::Zero(m, m);
  ag.features = Eigen::MatrixXd::Zero(m, kFeatureWidth);
  ag.roles.assign(static_cast<std::size_t>(m), NodeRole::Operation);
  ag.roles[input] = NodeRole::Input;
  ag.roles[output] = NodeRole::Output;
  ag.roles[global] = NodeRole::Global;

  for (Eigen::Index i = input; i < output; ++i) ag.adjacency(i, i + 1) = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i == global) continue;
    ag.adjacency(global, i) = 1.0;
    ag.adjacency(i, global) = 1.0;
  }

  for (Eigen::Index i = 0; i < n_ops; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto row = encode_position(g.positions[idx].op, g.function_at(idx));
    for (int c = 0; c < kFeatureWidth; ++c) ag.features(i + 1, c) = row[c];
  }
  const auto glob = global_features(stats);
  for (int c = 0; c < kFeatureWidth; ++c) ag.features(global, c) = glob[c];
  return ag;
}

ArchGraph permute_nodes(const ArchGraph& ag, const std::vector<Eigen::Index>& perm) {
  const Eigen::Index m = ag.node_count();
  if (static_cast<Eigen::Index>(perm.size()) != m) {
    throw ConfigError("permutation size does not match the graph");
  }
  ArchGraph out;
  out.encoding_version = ag.encoding_version;
  out.adjacency.resize(m, m);
  out.features.resize(m, ag.features.cols());
  out.roles.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index src = perm[static_cast<std::size_t>(i)];
    out.roles[static_cast<std::size_t>(i)] = ag.roles[static_cast<std::size_t>(src)];
    out.features.row(i) = ag.features.row(src);
    for (Eigen::Index j = 0; j < m; ++j) {
      out.adjacency(i, j) = ag.adjacency(src, perm[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

Json arch_graph_to_json(const ArchGraph& ag) {
  Json nodes = Json::array();
  for (Eigen::Index i = 0; i < ag.node_count(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < ag.features.cols(); ++c) row.push_back(ag.features(i, c));
    Json node;
    node["index"] = i;
    node["role"] = to_string(ag.roles[static_cast<std::size_t>(i)]);
    node["features"] = std::move(row);
    nodes.push_back(std::move(node));
  }
  Json edges = Json::array();
  for (Eigen::Index i = 0; i < ag.node_count(); ++i) {
    for (Eigen::Index j = 0; j < ag.node_count(); ++j) {
      if (ag.adjacency(i, j) != 0.0) edges.push_back(Json::array({i, j}));
    }
  }
  Json j;
  j["encoding_version"] = ag.encoding_version;
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  return j;
}

}  // namespace gnas
