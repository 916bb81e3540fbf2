#include "gnas/design_space.hpp"

#include <algorithm>
#include <span>

#include "gnas/error.hpp"
#include "gnas/rng.hpp"

namespace gnas {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table,
             std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw FormatError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [value, name] : table) {
    if (value == v) return name;
  }
  return "?";
}

constexpr std::array<std::pair<OperationKind, std::string_view>, 4> kOpNames{{
    {OperationKind::Connect, "connect"},
    {OperationKind::Aggregate, "aggregate"},
    {OperationKind::Combine, "combine"},
    {OperationKind::Sample, "sample"},
}};
constexpr std::array<std::pair<ConnectFn, std::string_view>, 2> kConnectNames{{
    {ConnectFn::SkipConnect, "skip_connect"},
    {ConnectFn::Identity, "identity"},
}};
constexpr std::array<std::pair<Aggregator, std::string_view>, 4> kAggregatorNames{{
    {Aggregator::Sum, "sum"},
    {Aggregator::Min, "min"},
    {Aggregator::Max, "max"},
    {Aggregator::Mean, "mean"},
}};
constexpr std::array<std::pair<MessageType, std::string_view>, 7> kMessageNames{{
    {MessageType::SourcePos, "source_pos"},
    {MessageType::TargetPos, "target_pos"},
    {MessageType::RelativePos, "relative_pos"},
    {MessageType::SourceConcatRelative, "source_concat_relative"},
    {MessageType::TargetConcatRelative, "target_concat_relative"},
    {MessageType::EuclideanDistance, "euclidean_distance"},
    {MessageType::Full, "full"},
}};
constexpr std::array<std::pair<SampleFn, std::string_view>, 2> kSampleNames{{
    {SampleFn::Knn, "knn"},
    {SampleFn::Random, "random"},
}};

template <typename T>
bool table_contains(const std::vector<T>& table, const T& v) {
  return std::find(table.begin(), table.end(), v) != table.end();
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& table) {
  return rng.pick(std::span<const T>(table));
}

FunctionSet draw_function_set(Rng& rng, const FunctionTables& t) {
  FunctionSet fs;
  fs.connect_fn = pick(rng, t.connect);
  fs.aggregator = pick(rng, t.aggregators);
  fs.message_type = pick(rng, t.messages);
  fs.combine_dim = pick(rng, t.combine_dims);
  fs.sample_fn = pick(rng, t.samples);
  return fs;
}

OperationKind draw_operation(Rng& rng) {
  return kAllOperations[rng.uniform_index(kAllOperations.size())];
}

void mutate_function_set(Rng& rng, FunctionSet& fs, const FunctionTables& t, double rate) {
  if (rng.bernoulli(rate)) fs.connect_fn = pick(rng, t.connect);
  if (rng.bernoulli(rate)) fs.aggregator = pick(rng, t.aggregators);
  if (rng.bernoulli(rate)) fs.message_type = pick(rng, t.messages);
  if (rng.bernoulli(rate)) fs.combine_dim = pick(rng, t.combine_dims);
  if (rng.bernoulli(rate)) fs.sample_fn = pick(rng, t.samples);
}

void check_function_set(const FunctionSet& fs, const FunctionTables& t, std::string_view half,
                        std::vector<std::string>& out) {
  const std::string prefix = std::string(half) + ".";
  if (!table_contains(t.connect, fs.connect_fn)) out.push_back(prefix + "connect_fn not in table");
  if (!table_contains(t.aggregators, fs.aggregator))
    out.push_back(prefix + "aggregator not in table");
  if (!table_contains(t.messages, fs.message_type))
    out.push_back(prefix + "message_type not in table");
  if (!table_contains(t.combine_dims, fs.combine_dim))
    out.push_back(prefix + "combine_dim not in table");
  if (!table_contains(t.samples, fs.sample_fn)) out.push_back(prefix + "sample_fn not in table");
}

}  // namespace

// --- names -----------------------------------------------------------------

std::string_view to_string(OperationKind v) { return enum_name(v, kOpNames); }
std::string_view to_string(ConnectFn v) { return enum_name(v, kConnectNames); }
std::string_view to_string(Aggregator v) { return enum_name(v, kAggregatorNames); }
std::string_view to_string(MessageType v) { return enum_name(v, kMessageNames); }
std::string_view to_string(SampleFn v) { return enum_name(v, kSampleNames); }

OperationKind parse_operation(std::string_view s) { return parse_enum(s, kOpNames, "operation"); }
ConnectFn parse_connect_fn(std::string_view s) {
  return parse_enum(s, kConnectNames, "connect function");
}
Aggregator parse_aggregator(std::string_view s) {
  return parse_enum(s, kAggregatorNames, "aggregator");
}
MessageType parse_message_type(std::string_view s) {
  return parse_enum(s, kMessageNames, "message type");
}
SampleFn parse_sample_fn(std::string_view s) {
  return parse_enum(s, kSampleNames, "sample function");
}

OperationKind kind_of(const FunctionChoice& fn) {
  return static_cast<OperationKind>(fn.index());
}

// --- genotype --------------------------------------------------------------

const FunctionSet& Genotype::functions_for(std::size_t index) const {
  return index < positions.size() / 2 ? upper : lower;
}

FunctionChoice Genotype::function_at(std::size_t index) const {
  const Position& p = positions.at(index);
  const FunctionSet& fs = functions_for(index);
  switch (p.op) {
    case OperationKind::Connect:
      return p.forced_identity ? ConnectFn::Identity : fs.connect_fn;
    case OperationKind::Aggregate:
      return AggregateFn{fs.aggregator, fs.message_type};
    case OperationKind::Combine:
      return CombineFn{fs.combine_dim};
    case OperationKind::Sample:
      return fs.sample_fn;
  }
  return ConnectFn::Identity;
}

std::vector<OperationKind> Genotype::operations() const {
  std::vector<OperationKind> ops;
  ops.reserve(positions.size());
  for (const auto& p : positions) ops.push_back(p.op);
  return ops;
}

Genotype make_genotype(const std::vector<OperationKind>& ops, const FunctionSet& upper,
                       const FunctionSet& lower) {
  Genotype g;
  g.positions.reserve(ops.size());
  for (auto op : ops) g.positions.push_back(Position{op, false});
  g.upper = upper;
  g.lower = lower;
  return g;
}

// --- tables ----------------------------------------------------------------

std::uint64_t FunctionTables::function_set_count() const {
  return static_cast<std::uint64_t>(connect.size()) * aggregators.size() * messages.size() *
         combine_dims.size() * samples.size();
}

bool FunctionTables::contains(const FunctionSet& fs) const {
  return table_contains(connect, fs.connect_fn) && table_contains(aggregators, fs.aggregator) &&
         table_contains(messages, fs.message_type) &&
         table_contains(combine_dims, fs.combine_dim) && table_contains(samples, fs.sample_fn);
}

// --- space -----------------------------------------------------------------

DesignSpace::DesignSpace(SpaceConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.num_positions < 2) throw ConfigError("num_positions must be >= 2");
  if (cfg_.num_positions % 2 != 0) throw ConfigError("num_positions must be even");
  if (cfg_.input_feature_dim < 1) throw ConfigError("input_feature_dim must be >= 1");
  const auto& t = cfg_.tables;
  if (t.connect.empty()) throw ConfigError("function table 'connect' is empty");
  if (t.aggregators.empty()) throw ConfigError("function table 'aggregators' is empty");
  if (t.messages.empty()) throw ConfigError("function table 'messages' is empty");
  if (t.combine_dims.empty()) throw ConfigError("function table 'combine_dims' is empty");
  if (t.samples.empty()) throw ConfigError("function table 'samples' is empty");
  for (int d : t.combine_dims) {
    if (std::find(kCombineDims.begin(), kCombineDims.end(), d) == kCombineDims.end()) {
      throw ConfigError("function table 'combine_dims' holds unsupported width " +
                        std::to_string(d));
    }
  }
}

Genotype DesignSpace::sample(std::uint64_t seed) const {
  Rng rng(seed);
  Genotype g;
  g.positions.resize(static_cast<std::size_t>(cfg_.num_positions));
  for (auto& p : g.positions) p.op = draw_operation(rng);
  g.upper = draw_function_set(rng, cfg_.tables);
  g.lower = draw_function_set(rng, cfg_.tables);
  return g;
}

FunctionSet DesignSpace::sample_function_set(std::uint64_t seed) const {
  Rng rng(seed);
  return draw_function_set(rng, cfg_.tables);
}

std::vector<OperationKind> DesignSpace::sample_operations(std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<OperationKind> ops(static_cast<std::size_t>(cfg_.num_positions));
  for (auto& op : ops) op = draw_operation(rng);
  return ops;
}

BigInt DesignSpace::cardinality(CardinalityLevel level) const {
  BigInt ops = boost::multiprecision::pow(BigInt(kAllOperations.size()),
                                          static_cast<unsigned>(cfg_.num_positions));
  BigInt per_half = BigInt(cfg_.tables.function_set_count());
  BigInt fns = per_half * per_half;
  switch (level) {
    case CardinalityLevel::Operations:
      return ops;
    case CardinalityLevel::Functions:
      return fns;
    case CardinalityLevel::Joint:
      return ops * fns;
  }
  return 0;
}

Genotype DesignSpace::mutate(const Genotype& g, double rate, std::uint64_t seed,
                             MutationScope scope) const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("mutation rate must lie in [0, 1]");
  Rng rng(seed);
  Genotype out = g;
  if (scope != MutationScope::FunctionsOnly) {
    for (auto& p : out.positions) {
      if (rng.bernoulli(rate)) p = Position{draw_operation(rng), false};
    }
  }
  if (scope != MutationScope::PositionsOnly) {
    mutate_function_set(rng, out.upper, cfg_.tables, rate);
    mutate_function_set(rng, out.lower, cfg_.tables, rate);
  }
  return out;
}

Genotype DesignSpace::crossover(const Genotype& a, const Genotype& b, std::uint64_t seed) const {
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(cfg_.num_positions)) {
    throw ConfigError("crossover parents come from different spaces");
  }
  Rng rng(seed);
  // Cut strictly inside the sequence so both parents contribute positions.
  const std::size_t cut = 1 + rng.uniform_index(a.size() - 1);
  const bool upper_from_a = rng.bernoulli(0.5);
  const bool lower_from_a = rng.bernoulli(0.5);
  return crossover_at(a, b, cut, upper_from_a, lower_from_a);
}

ValidationReport DesignSpace::validate(const Genotype& g) const { return gnas::validate(g, cfg_); }

Genotype crossover_at(const Genotype& a, const Genotype& b, std::size_t cut, bool upper_from_a,
                      bool lower_from_a) {
  if (a.size() != b.size()) throw ConfigError("crossover parents differ in length");
  if (cut > a.size()) throw ConfigError("crossover cut beyond the sequence");
  Genotype out;
  out.positions.reserve(a.size());
  out.positions.insert(out.positions.end(), a.positions.begin(),
                       a.positions.begin() + static_cast<std::ptrdiff_t>(cut));
  out.positions.insert(out.positions.end(),
                       b.positions.begin() + static_cast<std::ptrdiff_t>(cut), b.positions.end());
  out.upper = upper_from_a ? a.upper : b.upper;
  out.lower = lower_from_a ? a.lower : b.lower;
  return out;
}

DesignSpace new_space(const SpaceConfig& cfg) { return DesignSpace(cfg); }

Genotype sample_genotype(const DesignSpace& space, std::uint64_t seed) {
  return space.sample(seed);
}

BigInt cardinality(const DesignSpace& space, CardinalityLevel level) {
  return space.cardinality(level);
}

ValidationReport validate(const Genotype& g, const SpaceConfig& cfg) {
  ValidationReport report;
  if (g.positions.size() != static_cast<std::size_t>(cfg.num_positions)) {
    report.violations.push_back("length mismatch: expected " + std::to_string(cfg.num_positions) +
                                " positions, got " + std::to_string(g.positions.size()));
  }
  for (std::size_t i = 0; i < g.positions.size(); ++i) {
    const auto& p = g.positions[i];
    if (p.forced_identity && p.op != OperationKind::Connect) {
      report.violations.push_back("position " + std::to_string(i) +
                                  ": forced identity on a non-connect operation");
    }
  }
  check_function_set(g.upper, cfg.tables, "upper", report.violations);
  check_function_set(g.lower, cfg.tables, "lower", report.violations);
  return report;
}

// --- canonical form --------------------------------------------------------

Genotype canonicalize(const Genotype& g) {
  Genotype out = g;
  auto& pos = out.positions;
  for (std::size_t i = 0; i + 1 < pos.size(); ++i) {
    if (pos[i].op == OperationKind::Sample && pos[i + 1].op == OperationKind::Sample) {
      pos[i] = Position{OperationKind::Connect, true};
    }
  }
  return out;
}

bool needs_implicit_sample(const Genotype& g) {
  for (const auto& p : g.positions) {
    if (p.op == OperationKind::Sample) return false;
    if (p.op == OperationKind::Aggregate) return true;
  }
  return false;
}

Genotype dgcnn_preset() {
  FunctionSet fs;
  fs.connect_fn = ConnectFn::Identity;
  fs.aggregator = Aggregator::Sum;
  fs.message_type = MessageType::TargetConcatRelative;
  fs.combine_dim = 64;
  fs.sample_fn = SampleFn::Knn;
  std::vector<OperationKind> ops;
  for (int layer = 0; layer < 4; ++layer) {
    ops.push_back(OperationKind::Sample);
    ops.push_back(OperationKind::Aggregate);
    ops.push_back(OperationKind::Combine);
  }
  return make_genotype(ops, fs, fs);
}

}  // namespace gnas
