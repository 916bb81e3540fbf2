#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace gnas {

// ---------------------------------------------------------------------------
// Operation and function vocabularies
// ---------------------------------------------------------------------------

enum class OperationKind : std::uint8_t { Connect, Aggregate, Combine, Sample };
inline constexpr std::array kAllOperations{OperationKind::Connect, OperationKind::Aggregate,
                                           OperationKind::Combine, OperationKind::Sample};

enum class ConnectFn : std::uint8_t { SkipConnect, Identity };
enum class Aggregator : std::uint8_t { Sum, Min, Max, Mean };
/// Listed in table order; the index is part of the predictor encoding.
enum class MessageType : std::uint8_t {
  SourcePos,
  TargetPos,
  RelativePos,
  SourceConcatRelative,
  TargetConcatRelative,
  EuclideanDistance,
  Full,
};
enum class SampleFn : std::uint8_t { Knn, Random };

inline constexpr std::array kCombineDims{8, 16, 32, 64, 128, 256};

struct AggregateFn {
  Aggregator aggregator;
  MessageType message;
  friend bool operator==(const AggregateFn&, const AggregateFn&) = default;
};

struct CombineFn {
  int dim;
  friend bool operator==(const CombineFn&, const CombineFn&) = default;
};

/// The function attached to one operation; the alternative matches the
/// operation kind.
using FunctionChoice = std::variant<ConnectFn, AggregateFn, CombineFn, SampleFn>;

/// One chosen function per operation kind, shared by half of the positions.
struct FunctionSet {
  ConnectFn connect_fn = ConnectFn::Identity;
  Aggregator aggregator = Aggregator::Sum;
  MessageType message_type = MessageType::TargetConcatRelative;
  int combine_dim = 64;
  SampleFn sample_fn = SampleFn::Knn;

  friend auto operator<=>(const FunctionSet&, const FunctionSet&) = default;
};

/// A supernet slot. `forced_identity` marks a Connect produced by merging
/// adjacent samples: it behaves as Identity regardless of the shared
/// connect function.
struct Position {
  OperationKind op = OperationKind::Connect;
  bool forced_identity = false;

  friend auto operator<=>(const Position&, const Position&) = default;
};

struct Genotype {
  std::vector<Position> positions;
  FunctionSet upper;
  FunctionSet lower;

  std::size_t size() const { return positions.size(); }
  /// Positions [0, n/2) read `upper`, the rest read `lower`.
  const FunctionSet& functions_for(std::size_t index) const;
  FunctionChoice function_at(std::size_t index) const;
  std::vector<OperationKind> operations() const;

  /// Lexicographic over (positions, upper, lower); used for every tie-break.
  friend auto operator<=>(const Genotype&, const Genotype&) = default;
};

Genotype make_genotype(const std::vector<OperationKind>& ops, const FunctionSet& upper,
                       const FunctionSet& lower);

// ---------------------------------------------------------------------------
// Names (lower_snake_case, used by every file format)
// ---------------------------------------------------------------------------

std::string_view to_string(OperationKind v);
std::string_view to_string(ConnectFn v);
std::string_view to_string(Aggregator v);
std::string_view to_string(MessageType v);
std::string_view to_string(SampleFn v);

OperationKind parse_operation(std::string_view s);
ConnectFn parse_connect_fn(std::string_view s);
Aggregator parse_aggregator(std::string_view s);
MessageType parse_message_type(std::string_view s);
SampleFn parse_sample_fn(std::string_view s);

OperationKind kind_of(const FunctionChoice& fn);

// ---------------------------------------------------------------------------
// Space configuration
// ---------------------------------------------------------------------------

struct FunctionTables {
  std::vector<ConnectFn> connect{ConnectFn::SkipConnect, ConnectFn::Identity};
  std::vector<Aggregator> aggregators{Aggregator::Sum, Aggregator::Min, Aggregator::Max,
                                      Aggregator::Mean};
  std::vector<MessageType> messages{
      MessageType::SourcePos,           MessageType::TargetPos,
      MessageType::RelativePos,         MessageType::SourceConcatRelative,
      MessageType::TargetConcatRelative, MessageType::EuclideanDistance,
      MessageType::Full};
  std::vector<int> combine_dims{kCombineDims.begin(), kCombineDims.end()};
  std::vector<SampleFn> samples{SampleFn::Knn, SampleFn::Random};

  /// Number of distinct FunctionSets.
  std::uint64_t function_set_count() const;
  bool contains(const FunctionSet& fs) const;

  friend bool operator==(const FunctionTables&, const FunctionTables&) = default;
};

struct SpaceConfig {
  int num_positions = 12;
  FunctionTables tables;
  int input_feature_dim = 3;

  friend bool operator==(const SpaceConfig&, const SpaceConfig&) = default;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

enum class CardinalityLevel { Operations, Functions, Joint };

/// Which parts of a genotype `mutate` may resample.
enum class MutationScope { All, PositionsOnly, FunctionsOnly };

using BigInt = boost::multiprecision::cpp_int;

/// A validated space handle. Construction throws ConfigError naming the
/// offending field.
class DesignSpace {
 public:
  explicit DesignSpace(SpaceConfig cfg);

  const SpaceConfig& config() const { return cfg_; }
  const FunctionTables& tables() const { return cfg_.tables; }
  int num_positions() const { return cfg_.num_positions; }

  Genotype sample(std::uint64_t seed) const;
  FunctionSet sample_function_set(std::uint64_t seed) const;
  std::vector<OperationKind> sample_operations(std::uint64_t seed) const;

  BigInt cardinality(CardinalityLevel level) const;

  Genotype mutate(const Genotype& g, double rate, std::uint64_t seed,
                  MutationScope scope = MutationScope::All) const;
  Genotype crossover(const Genotype& a, const Genotype& b, std::uint64_t seed) const;

  ValidationReport validate(const Genotype& g) const;

 private:
  SpaceConfig cfg_;
};

DesignSpace new_space(const SpaceConfig& cfg);
Genotype sample_genotype(const DesignSpace& space, std::uint64_t seed);
ValidationReport validate(const Genotype& g, const SpaceConfig& cfg);
BigInt cardinality(const DesignSpace& space, CardinalityLevel level);

/// Single-point crossover with an explicit cut: positions [0, cut) from `a`,
/// the rest from `b`; each function set taken wholly from the chosen parent.
Genotype crossover_at(const Genotype& a, const Genotype& b, std::size_t cut, bool upper_from_a,
                      bool lower_from_a);

/// Collapses each run of consecutive Sample positions so only the last one
/// stays effective; earlier ones become forced-identity Connects. Idempotent.
Genotype canonicalize(const Genotype& g);

/// True when an Aggregate executes before any Sample, i.e. the executor has to
/// build a KNN graph over the input coordinates first.
bool needs_implicit_sample(const Genotype& g);

/// DGCNN: four repetitions of Sample, Aggregate, Combine with KNN graphs,
/// sum aggregation over x_i || (x_j - x_i) messages and 64-wide combines.
Genotype dgcnn_preset();

}  // namespace gnas
