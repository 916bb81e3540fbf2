#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gnas/design_space.hpp"
#include "gnas/device_cost.hpp"
#include "gnas/genotype_io.hpp"
#include "gnas/graph_stats.hpp"
#include "gnas/predictor.hpp"

namespace gnas {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Hardware limits; a candidate is feasible only when strictly below both.
struct Constraints {
  double c_lat_ms = kUnbounded;
  double c_mem_bytes = kUnbounded;

  void validate() const;
};

struct EfficiencyMetrics {
  double latency_ms = 0.0;
  double peak_mem_bytes = 0.0;
  std::optional<double> energy_mj;
};

bool is_feasible(const EfficiencyMetrics& eff, const Constraints& c);

// ---------------------------------------------------------------------------
// Evaluators
// ---------------------------------------------------------------------------

/// Hardware cost of a canonical genotype on the target device.
class HardwareEvaluator {
 public:
  virtual ~HardwareEvaluator() = default;
  virtual EfficiencyMetrics evaluate(const Genotype& canonical) const = 0;
};

/// Synthetic device model for latency, closed-form estimator for memory.
class CostModelEvaluator final : public HardwareEvaluator {
 public:
  CostModelEvaluator(DeviceProfile profile, GraphStats stats);
  EfficiencyMetrics evaluate(const Genotype& canonical) const override;

 private:
  DeviceProfile profile_;
  GraphStats stats_;
};

/// Learned latency; peak memory from the memory predictor floored by the
/// estimator when one is given, otherwise the estimator alone.
class PredictorEvaluator final : public HardwareEvaluator {
 public:
  PredictorEvaluator(ModelWeights latency_model, std::optional<ModelWeights> memory_model,
                     const DeviceProfile& device, GraphStats stats);
  EfficiencyMetrics evaluate(const Genotype& canonical) const override;

 private:
  ModelWeights latency_;
  std::optional<ModelWeights> memory_;
  DeviceProfile device_;
  GraphStats stats_;
  int latency_device_ = 0;
  int memory_device_ = 0;
};

using AccuracyEvaluator = std::function<double(const Genotype&)>;

/// Stand-in validation accuracy. With A/C/S the Aggregate/Combine/Sample
/// counts after canonicalization:
///   clamp(0.55 + 0.06 min(A,3) + 0.04 min(C,4) + 0.05 min(S,1)
///         - 0.02 max(S-2,0) + 0.02 [relative message in either half], 0, 0.95)
double default_accuracy_landscape(const Genotype& g);

/// "default" or "constant" (0.5 everywhere).
AccuracyEvaluator make_accuracy_evaluator(const std::string& name);

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

enum class HwEvalKind : std::uint8_t { CostModel, Predictor };

struct SearchConfig {
  double alpha = 1.0;
  double beta = 0.1;
  Constraints constraints;
  int population = 20;
  int max_iterations = 1000;
  std::optional<int> stage1_iterations;  // defaults to max_iterations
  std::optional<int> stage2_iterations;  // defaults to max_iterations
  int stage1_samples = 8;                // op-configs averaged per function pair
  double mutation_rate = 0.15;
  double crossover_rate = 0.5;
  int elite_count = 2;
  std::uint64_t seed = 0;
  std::string device = "gpu_like";
  GraphStats stats;
  HwEvalKind hw_eval = HwEvalKind::CostModel;
  std::string accuracy_eval = "default";
  /// Efficiency normalizers. Unset: the constraint when finite, else the
  /// DGCNN preset's value on the device. Infinity drops the term.
  std::optional<double> lat_ref_ms;
  std::optional<double> mem_ref_bytes;

  int t1() const { return stage1_iterations.value_or(max_iterations); }
  int t2() const { return stage2_iterations.value_or(max_iterations); }
  void validate() const;
};

/// Everything `objective` needs, with reference scales resolved.
struct ObjectiveSpec {
  double alpha = 1.0;
  double beta = 0.0;
  Constraints constraints;
  double lat_ref_ms = kUnbounded;
  double mem_ref_bytes = kUnbounded;
};

ObjectiveSpec resolve_objective(const SearchConfig& cfg, const HardwareEvaluator& hw);

/// 0 when a constraint is violated, else alpha*acc - beta*normalized
/// efficiency. Throws ConfigError for negative alpha or beta.
double objective(double accuracy, const EfficiencyMetrics& eff, const ObjectiveSpec& spec);

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------

struct Individual {
  Genotype genotype;
  std::optional<double> score;
  bool feasible = true;
};

/// Ranking used everywhere: feasible first, then higher score, then the
/// lexicographically smaller genotype.
bool ranks_before(const Individual& a, const Individual& b);

struct EaParams {
  int population = 20;
  int elite_count = 2;
  double crossover_rate = 0.5;
  double mutation_rate = 0.15;
};

struct Variation {
  std::function<Genotype(const Genotype&, std::uint64_t seed)> mutate;
  std::function<Genotype(const Genotype&, const Genotype&, std::uint64_t seed)> crossover;
};

/// Keeps the elites, fills the rest by binary tournaments, crossover and
/// mutation. New individuals come back unscored. Throws DomainError when an
/// input individual is unscored.
std::vector<Individual> ea_step(const std::vector<Individual>& pop, const EaParams& params,
                                std::uint64_t seed, const Variation& variation);

struct GenerationStats {
  double best = 0.0;
  double mean = 0.0;
};

struct SearchResult {
  bool feasible = false;
  std::optional<Genotype> best;  // raw (pre-canonicalization) sequence
  double best_score = 0.0;
  EfficiencyMetrics metrics;
  double accuracy = 0.0;
  std::vector<GenerationStats> history;
  std::int64_t evaluated_count = 0;
};

/// Stage-1 outcome: the shared function sets and their mean accuracy.
struct FunctionSearchResult {
  FunctionSet upper;
  FunctionSet lower;
  double score = 0.0;
  std::vector<GenerationStats> history;
  std::int64_t evaluated_count = 0;  // accuracy evaluations
};

FunctionSearchResult search_functions(const DesignSpace& space, const AccuracyEvaluator& acc,
                                      const SearchConfig& cfg);

SearchResult search_operations(const DesignSpace& space, const FunctionSet& upper,
                               const FunctionSet& lower, const AccuracyEvaluator& acc,
                               const HardwareEvaluator& hw, const SearchConfig& cfg);

struct BruteForceResult {
  std::optional<Genotype> best;
  double score = 0.0;
  bool feasible = false;
  std::int64_t evaluated_count = 0;
};

inline constexpr std::uint64_t kBruteForceLimit = 1'000'000;

/// Exhaustive argmax over all 4^N operation sequences with fixed functions.
/// Throws ConfigError when 4^N exceeds 10^6.
BruteForceResult brute_force_optimum(const DesignSpace& space, const FunctionSet& upper,
                                     const FunctionSet& lower, const AccuracyEvaluator& acc,
                                     const HardwareEvaluator& hw, const SearchConfig& cfg);

struct FullSearchResult {
  FunctionSearchResult functions;
  SearchResult operations;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::int64_t evaluated_count = 0;
};

/// Function search, then operation search with the winning function pair.
FullSearchResult run_search(const DesignSpace& space, const SearchConfig& cfg,
                            const AccuracyEvaluator& acc, const HardwareEvaluator& hw,
                            const std::string& config_hash);

/// Pearson product-moment coefficient. Throws DomainError on length mismatch,
/// fewer than two points or zero variance ("undefined correlation").
double correlation(const std::vector<double>& xs, const std::vector<double>& ys);

Json to_json(const SearchConfig& cfg);
Json to_json(const EfficiencyMetrics& m);
Json to_json(const FullSearchResult& r);
std::string render_report(const FullSearchResult& r, const SearchConfig& cfg);

std::string_view to_string(HwEvalKind k);
HwEvalKind parse_hw_eval(std::string_view s);

}  // namespace gnas
