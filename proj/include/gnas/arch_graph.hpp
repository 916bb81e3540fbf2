#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "gnas/design_space.hpp"
#include "gnas/genotype_io.hpp"
#include "gnas/graph_stats.hpp"

namespace gnas {

/// Version of the node-feature layout below. Predictors record the version
/// they were trained with and refuse graphs built with another one.
inline constexpr int kEncodingVersion = 1;
inline constexpr int kRoleWidth = 7;
inline constexpr int kFunctionWidth = 9;
inline constexpr int kFeatureWidth = kRoleWidth + kFunctionWidth;

using FeatureVector = std::array<double, kFeatureWidth>;

enum class NodeRole : std::uint8_t { Input, Output, Global, Operation };

/// Role one-hot slots 0..6: input, output, global, connect, aggregate, combine,
/// sample. Function slots (offset 7):
///   0-3  aggregator one-hot (sum, min, max, mean)
///   4    message type index / 6
///   5    log2(combine width) / 8
///   6    1 for skip connect
///   7    1 for KNN sampling, 0 for random
///   8    reserved
/// Throws ConfigError when `fn` does not belong to `op`.
FeatureVector encode_position(OperationKind op, const FunctionChoice& fn);

/// [log2(N)/16, K/64, log2(dim+1)/8, batch/64, min(K/max(N-1,1), 1), U_k/8,
///  U_index/8, 0 x 9], each slot clamped to [0, 1].
FeatureVector global_features(const GraphStats& stats);

/// Directed architecture graph: nodes [input, op_1..op_N, output, global].
/// The chain input -> op_1 -> ... -> op_N -> output carries the dataflow;
/// the global node is linked both ways with every other node.
struct ArchGraph {
  Eigen::MatrixXd adjacency;  // M x M, 0/1
  Eigen::MatrixXd features;   // M x 16
  std::vector<NodeRole> roles;
  int encoding_version = kEncodingVersion;

  Eigen::Index node_count() const { return adjacency.rows(); }
  /// Row of the (unique) global node.
  Eigen::Index global_index() const;
};

ArchGraph build_arch_graph(const Genotype& g, const GraphStats& stats);

/// Reorders nodes: new node i is old node perm[i].
ArchGraph permute_nodes(const ArchGraph& ag, const std::vector<Eigen::Index>& perm);

/// Debug export: {"encoding_version", "nodes":[{"index","role","features"}],
/// "edges":[[src,dst],...]}.
Json arch_graph_to_json(const ArchGraph& ag);

std::string_view to_string(NodeRole role);

}  // namespace gnas
