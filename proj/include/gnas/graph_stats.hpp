#pragma once

#include <cstdint>

namespace gnas {

/// Descriptor of the input data a candidate network runs on.
struct GraphStats {
  std::int64_t num_points = 1024;
  std::int64_t neighbors_per_node = 20;
  std::int64_t input_feature_dim = 3;
  std::int64_t batch_size = 1;
  int weight_precision = 4;  // bytes per real (U_k)
  int index_precision = 8;   // bytes per edge index (U_index)

  /// Throws ConfigError when a count is < 1 or a precision is not 2, 4 or 8.
  void validate() const;

  /// N x K x batch: edges materialized by one sampling step.
  std::int64_t edge_count() const { return num_points * neighbors_per_node * batch_size; }
  /// N x batch: node rows of every feature tensor.
  std::int64_t node_rows() const { return num_points * batch_size; }

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

}  // namespace gnas
