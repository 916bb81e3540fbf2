#include <gtest/gtest.h>

#include <algorithm>

#include "gnas/design_space.hpp"
#include "gnas/error.hpp"
#include "gnas/rng.hpp"
#include "gnas/search.hpp"

using namespace gnas;
using O = OperationKind;

namespace {

SpaceConfig small_space() {
  SpaceConfig c;
  c.num_positions = 4;
  return c;
}

ObjectiveSpec spec_with(double alpha, double beta, double c_lat = kUnbounded) {
  ObjectiveSpec s;
  s.alpha = alpha;
  s.beta = beta;
  s.constraints.c_lat_ms = c_lat;
  s.lat_ref_ms = 1.0;
  s.mem_ref_bytes = kUnbounded;
  return s;
}

EfficiencyMetrics eff(double lat, double mem = 1000) {
  EfficiencyMetrics e;
  e.latency_ms = lat;
  e.peak_mem_bytes = mem;
  return e;
}

int count_of(const Genotype& g, O op) {
  return static_cast<int>(std::count_if(g.positions.begin(), g.positions.end(),
                                        [op](const Position& p) { return p.op == op; }));
}

bool has_relative(MessageType m) {
  return m == MessageType::RelativePos || m == MessageType::SourceConcatRelative ||
         m == MessageType::TargetConcatRelative;
}

}  // namespace

TEST(Objective, Examples) {
  EXPECT_EQ(objective(0.95, eff(60), spec_with(1, 0.001, 50)), 0.0);
  EXPECT_DOUBLE_EQ(objective(0.9, eff(3), spec_with(1, 0)), 0.9);
  EXPECT_NEAR(objective(0.92, eff(8.6), spec_with(1, 0.001)), 0.9114, 1e-12);
}

TEST(Objective, StrictConstraints) {
  EXPECT_EQ(objective(0.9, eff(50), spec_with(1, 0, 50)), 0.0);
  EXPECT_GT(objective(0.9, eff(49.999), spec_with(1, 0, 50)), 0.0);
  ObjectiveSpec s = spec_with(1, 0);
  s.constraints.c_mem_bytes = 1000;
  EXPECT_EQ(objective(0.9, eff(1, 1000), s), 0.0);
  EXPECT_FALSE(is_feasible(eff(1, 1000), s.constraints));
}

TEST(Objective, RejectsNegativeWeights) {
  EXPECT_THROW(objective(0.9, eff(1), spec_with(-1, 0)), ConfigError);
  EXPECT_THROW(objective(0.9, eff(1), spec_with(1, -0.1)), ConfigError);
}

TEST(Objective, ReferenceResolution) {
  const CostModelEvaluator hw(builtin_profile("gpu_like"), GraphStats{});
  const EfficiencyMetrics preset = hw.evaluate(dgcnn_preset());
  SearchConfig cfg;
  ObjectiveSpec s = resolve_objective(cfg, hw);
  EXPECT_DOUBLE_EQ(s.lat_ref_ms, preset.latency_ms);
  EXPECT_DOUBLE_EQ(s.mem_ref_bytes, preset.peak_mem_bytes);
  cfg.constraints.c_lat_ms = 12;
  EXPECT_DOUBLE_EQ(resolve_objective(cfg, hw).lat_ref_ms, 12);
  cfg.lat_ref_ms = 3;
  cfg.mem_ref_bytes = kUnbounded;
  s = resolve_objective(cfg, hw);
  EXPECT_DOUBLE_EQ(s.lat_ref_ms, 3);
  EXPECT_EQ(s.mem_ref_bytes, kUnbounded);
}

TEST(Landscape, Values) {
  FunctionSet plain = dgcnn_preset().upper;
  plain.message_type = MessageType::SourcePos;
  const Genotype identity =
      make_genotype({O::Connect, O::Connect, O::Connect, O::Connect}, plain, plain);
  EXPECT_DOUBLE_EQ(default_accuracy_landscape(identity), 0.55);
  EXPECT_NEAR(default_accuracy_landscape(dgcnn_preset()), 0.92, 1e-12);
  EXPECT_DOUBLE_EQ(make_accuracy_evaluator("constant")(dgcnn_preset()), 0.5);
  EXPECT_THROW(make_accuracy_evaluator("oracle"), ConfigError);
}

TEST(Landscape, MonotoneInAggregates) {
  const DesignSpace space(SpaceConfig{});
  for (std::uint64_t s = 0; s < 500; ++s) {
    const Genotype g = canonicalize(space.sample(s));
    if (count_of(g, O::Aggregate) >= 3) continue;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.positions[i].op != O::Connect) continue;
      Genotype h = g;
      h.positions[i] = Position{O::Aggregate, false};
      ASSERT_GE(default_accuracy_landscape(canonicalize(h)), default_accuracy_landscape(g));
    }
  }
}

TEST(Ranking, FeasibleThenScoreThenGenotype) {
  const DesignSpace space(small_space());
  const Genotype a = space.sample(1);
  const Genotype b = space.sample(2);
  EXPECT_TRUE(ranks_before({a, 0.1, true}, {b, 0.9, false}));
  EXPECT_TRUE(ranks_before({a, 0.9, true}, {b, 0.1, true}));
  EXPECT_EQ(ranks_before({a, 0.5, true}, {b, 0.5, true}), a < b);
}

namespace {

Variation variation_for(const DesignSpace& space, double rate) {
  return {[&space, rate](const Genotype& g, std::uint64_t s) { return space.mutate(g, rate, s); },
          [&space](const Genotype& a, const Genotype& b, std::uint64_t s) {
            return space.crossover(a, b, s);
          }};
}

std::vector<Individual> scored_population(const DesignSpace& space, int n, std::uint64_t seed) {
  std::vector<Individual> pop;
  for (int i = 0; i < n; ++i) {
    const Genotype g = space.sample(derive_seed(seed, i));
    pop.push_back({g, static_cast<double>(count_of(g, O::Aggregate)), true});
  }
  return pop;
}

}  // namespace

TEST(EaStep, AllElitesKeepsPopulation) {
  const DesignSpace space(SpaceConfig{});
  const auto pop = scored_population(space, 6, 1);
  const auto next = ea_step(pop, {6, 6, 0.5, 0.2}, 3, variation_for(space, 0.2));
  ASSERT_EQ(next.size(), 6u);
  for (const auto& ind : pop) {
    EXPECT_TRUE(std::any_of(next.begin(), next.end(),
                            [&](const Individual& n) { return n.genotype == ind.genotype; }));
  }
}

TEST(EaStep, DeterministicAndSized) {
  const DesignSpace space(SpaceConfig{});
  const auto pop = scored_population(space, 10, 2);
  const EaParams p{10, 2, 0.5, 0.2};
  const auto a = ea_step(pop, p, 9, variation_for(space, 0.2));
  const auto b = ea_step(pop, p, 9, variation_for(space, 0.2));
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].genotype, b[i].genotype);
}

TEST(EaStep, RejectsUnscored) {
  const DesignSpace space(SpaceConfig{});
  auto pop = scored_population(space, 4, 3);
  pop[2].score.reset();
  EXPECT_THROW(ea_step(pop, {4, 1, 0.5, 0.2}, 1, variation_for(space, 0.2)), DomainError);
}

TEST(EaStep, ElitismKeepsBestOnLinearScore) {
  const DesignSpace space(SpaceConfig{});
  auto pop = scored_population(space, 12, 4);
  double best = 0.0;
  for (const auto& i : pop) best = std::max(best, *i.score);
  for (int gen = 0; gen < 50; ++gen) {
    pop = ea_step(pop, {12, 2, 0.5, 0.2}, derive_seed(5, gen), variation_for(space, 0.2));
    double now = 0.0;
    for (auto& i : pop) {
      if (!i.score) i.score = count_of(i.genotype, O::Aggregate);
      now = std::max(now, *i.score);
    }
    ASSERT_GE(now, best);
    best = now;
  }
}

TEST(FunctionSearch, FindsRelativeMessages) {
  const DesignSpace space(small_space());
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SearchConfig cfg;
    cfg.population = 20;
    cfg.max_iterations = 20;
    cfg.seed = seed;
    const auto r = search_functions(space, default_accuracy_landscape, cfg);
    hits += has_relative(r.upper.message_type) || has_relative(r.lower.message_type);
  }
  EXPECT_GE(hits, 9);
}

TEST(FunctionSearch, DegenerateInputs) {
  const DesignSpace space(small_space());
  SearchConfig cfg;
  cfg.population = 6;
  cfg.max_iterations = 1;
  const auto r = search_functions(space, make_accuracy_evaluator("constant"), cfg);
  EXPECT_TRUE(space.tables().contains(r.upper));
  EXPECT_TRUE(space.tables().contains(r.lower));
  EXPECT_EQ(r.history.size(), 1u);
}

TEST(OperationSearch, UnsatisfiableIsInfeasible) {
  const DesignSpace space(small_space());
  const CostModelEvaluator hw(builtin_profile("gpu_like"), GraphStats{});
  SearchConfig cfg;
  cfg.population = 8;
  cfg.max_iterations = 5;
  cfg.constraints.c_lat_ms = 1e-6;
  cfg.constraints.c_mem_bytes = 1.0;
  const FunctionSet fs = dgcnn_preset().upper;
  const auto r = search_operations(space, fs, fs, default_accuracy_landscape, hw, cfg);
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.best_score, 0.0);
}

TEST(OperationSearch, EfficiencyOnlyPicksIdentity) {
  const DesignSpace space(small_space());
  const CostModelEvaluator hw(builtin_profile("gpu_like"), GraphStats{});
  SearchConfig cfg;
  cfg.alpha = 0.0;
  cfg.beta = 10.0;
  cfg.population = 20;
  cfg.max_iterations = 30;
  FunctionSet fs = dgcnn_preset().upper;
  fs.connect_fn = ConnectFn::Identity;
  const auto r = search_operations(space, fs, fs, default_accuracy_landscape, hw, cfg);
  ASSERT_TRUE(r.best);
  for (const auto& p : canonicalize(*r.best).positions) EXPECT_EQ(p.op, O::Connect);
  EXPECT_EQ(r.metrics.latency_ms, 0.0);
}

TEST(OperationSearch, HistoryBestNeverDrops) {
  const DesignSpace space(SpaceConfig{});
  const CostModelEvaluator hw(builtin_profile("cpu_like"), GraphStats{});
  SearchConfig cfg;
  cfg.population = 10;
  cfg.max_iterations = 25;
  cfg.constraints.c_lat_ms = 200;
  const FunctionSet fs = dgcnn_preset().upper;
  const auto r = search_operations(space, fs, fs, default_accuracy_landscape, hw, cfg);
  ASSERT_EQ(r.history.size(), 25u);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_GE(r.history[i].best, r.history[i - 1].best);
  }
}

TEST(BruteForce, CountsAndGuard) {
  SpaceConfig two;
  two.num_positions = 2;
  const CostModelEvaluator hw(builtin_profile("gpu_like"), GraphStats{});
  const FunctionSet fs = dgcnn_preset().upper;
  SearchConfig cfg;
  EXPECT_EQ(brute_force_optimum(DesignSpace(two), fs, fs, default_accuracy_landscape, hw, cfg)
                .evaluated_count,
            16);
  EXPECT_THROW(brute_force_optimum(DesignSpace(SpaceConfig{}), fs, fs,
                                   default_accuracy_landscape, hw, cfg),
               ConfigError);
}

TEST(BruteForce, BetaZeroIsAccuracyArgmax) {
  const DesignSpace space(small_space());
  const CostModelEvaluator hw(builtin_profile("gpu_like"), GraphStats{});
  const FunctionSet fs = dgcnn_preset().upper;
  SearchConfig cfg;
  cfg.beta = 0.0;
  const auto r = brute_force_optimum(space, fs, fs, default_accuracy_landscape, hw, cfg);
  std::optional<Genotype> best;
  double top = -1.0;
  for (int code = 0; code < 256; ++code) {
    std::vector<O> ops(4);
    for (int i = 0, rest = code; i < 4; ++i, rest /= 4) ops[3 - i] = kAllOperations[rest % 4];
    const Genotype g = make_genotype(ops, fs, fs);
    const double a = default_accuracy_landscape(canonicalize(g));
    if (a > top) {
      top = a;
      best = g;
    }
  }
  EXPECT_DOUBLE_EQ(r.score, top);
  EXPECT_EQ(*r.best, *best);
}

TEST(RunSearch, DeterministicAndWithinBudget) {
  const DesignSpace space(small_space());
  const CostModelEvaluator hw(builtin_profile("gpu_like"), GraphStats{});
  SearchConfig cfg;
  cfg.population = 8;
  cfg.max_iterations = 6;
  cfg.stage1_samples = 4;
  cfg.constraints.c_lat_ms = 20;
  cfg.seed = 7;
  const auto a = run_search(space, cfg, default_accuracy_landscape, hw, "h");
  const auto b = run_search(space, cfg, default_accuracy_landscape, hw, "h");
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_LE(a.evaluated_count, static_cast<std::int64_t>(cfg.population) * cfg.max_iterations *
                                   (1 + cfg.stage1_samples));
  EXPECT_EQ(a.functions.history.size(), 6u);
}

TEST(Correlation, Examples) {
  EXPECT_NEAR(correlation({1, 2, 3}, {2, 4, 6}), 1.0, 1e-15);
  EXPECT_NEAR(correlation({1, 2, 3}, {6, 4, 2}), -1.0, 1e-15);
  EXPECT_NEAR(correlation({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-15);
  try {
    correlation({1, 1, 1}, {1, 2, 3});
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_STREQ(e.what(), "undefined correlation");
  }
  EXPECT_THROW(correlation({1}, {1}), DomainError);
  EXPECT_THROW(correlation({1, 2}, {1, 2, 3}), DomainError);
}

TEST(SearchConfig, Validation) {
  SearchConfig cfg;
  cfg.population = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SearchConfig{};
  cfg.elite_count = 50;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SearchConfig{};
  cfg.mutation_rate = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
