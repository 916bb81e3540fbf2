#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gnas/design_space.hpp"
#include "gnas/device_cost.hpp"
#include "gnas/genotype_io.hpp"
#include "gnas/graph_stats.hpp"
#include "gnas/predictor.hpp"
#include "gnas/search.hpp"

namespace gnas {

inline constexpr const char* kToolVersion = GNAS_VERSION;

/// Resolved run configuration. Read from an INI document:
///
///   seed = 0
///   [space]         num_positions, connect, aggregator, message_type,
///                   combine_dim, sample (comma-separated lists)
///   [graph]         num_points, neighbors_per_node, input_feature_dim,
///                   batch_size, weight_precision, index_precision
///   [devices.NAME]  c_knn, c_rand, c_msg, c_broad, c_comb, c_conn, avg_power_w
///   [predictor]     gcn_dims, mlp_dims, devices, leaky_slope, readout
///   [train]         epochs, batch_size, learning_rate, weight_decay,
///                   plateau_factor, plateau_patience, split_fraction,
///                   memory_batch_size, memory_learning_rate
///   [search]        alpha, beta, c_lat_ms, c_mem_bytes, population,
///                   max_iterations, stage1_iterations, stage2_iterations,
///                   stage1_samples, mutation_rate, crossover_rate,
///                   elite_count, device, hw_eval, accuracy, lat_ref_ms,
///                   mem_ref_bytes, latency_weights, memory_weights
///
/// Unknown sections or keys raise ConfigError.
struct RunConfig {
  std::uint64_t seed = 0;
  SpaceConfig space;
  GraphStats stats;
  std::vector<DeviceProfile> devices = builtin_profiles();
  PredictorConfig predictor;
  TrainConfig train;
  TrainConfig memory_train = TrainConfig::for_memory();
  SearchConfig search;
  std::string latency_weights;
  std::string memory_weights;

  const DeviceProfile& device(const std::string& name) const;
  /// Propagates the root seed into the train and search sections.
  void set_seed(std::uint64_t s);
  void validate() const;
};

RunConfig default_config();
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

/// Canonical JSON of every resolved field; the basis of `config_hash`.
Json to_json(const RunConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_hash(const RunConfig& cfg);

}  // namespace gnas
