#include <gtest/gtest.h>

#include <array>
#include <map>

#include "gnas/design_space.hpp"
#include "gnas/error.hpp"
#include "gnas/genotype_io.hpp"
#include "gnas/rng.hpp"

using namespace gnas;

namespace {

SpaceConfig space_with(int n) {
  SpaceConfig cfg;
  cfg.num_positions = n;
  return cfg;
}

using O = OperationKind;

bool has_violation(const ValidationReport& r, const std::string& needle) {
  for (const auto& v : r.violations) {
    if (v.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(DesignSpace, DefaultSpace) {
  const DesignSpace space(SpaceConfig{});
  EXPECT_EQ(space.num_positions(), 12);
  EXPECT_EQ(space.tables().function_set_count(), 672u);
}

TEST(DesignSpace, RejectsOddOrTinyN) {
  try {
    DesignSpace s(space_with(3));
    FAIL() << "odd N accepted";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "num_positions must be even");
  }
  EXPECT_THROW(DesignSpace(space_with(0)), ConfigError);
  SpaceConfig empty;
  empty.tables.samples.clear();
  EXPECT_THROW(DesignSpace{empty}, ConfigError);
}

TEST(DesignSpace, ReducedCombineTable) {
  SpaceConfig cfg = space_with(4);
  cfg.tables.combine_dims = {8, 16};
  const DesignSpace space(cfg);
  EXPECT_EQ(space.num_positions(), 4);
  EXPECT_EQ(space.cardinality(CardinalityLevel::Functions), BigInt(224) * 224);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Genotype g = space.sample(s);
    EXPECT_TRUE(space.validate(g).ok());
    EXPECT_LE(g.upper.combine_dim, 16);
  }
}

TEST(DesignSpace, SampleDeterministicAndValid) {
  const DesignSpace space(SpaceConfig{});
  EXPECT_EQ(space.sample(7), space.sample(7));
  EXPECT_TRUE(space.validate(space.sample(7)).ok());
  EXPECT_TRUE(space.validate(space.sample(8)).ok());
  EXPECT_NE(space.sample(7), space.sample(8));
}

TEST(DesignSpace, SamplingIsUniformPerPosition) {
  const DesignSpace space(space_with(4));
  std::array<std::array<int, 4>, 4> counts{};
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto ops = space.sample_operations(s);
    for (std::size_t i = 0; i < 4; ++i) ++counts[i][static_cast<int>(ops[i])];
  }
  for (const auto& row : counts) {
    for (int c : row) EXPECT_NEAR(c / 10000.0, 0.25, 0.02);
  }
}

TEST(DesignSpace, CardinalityOracle) {
  for (int n = 2; n <= 16; n += 2) {
    const DesignSpace space(space_with(n));
    BigInt expected = 1;
    for (int i = 0; i < n; ++i) expected *= 4;
    EXPECT_EQ(space.cardinality(CardinalityLevel::Operations), expected) << n;
  }
  const DesignSpace space(SpaceConfig{});
  EXPECT_EQ(space.cardinality(CardinalityLevel::Operations), BigInt(16777216));
  EXPECT_EQ(space.cardinality(CardinalityLevel::Functions), BigInt(451584));
  EXPECT_EQ(space.cardinality(CardinalityLevel::Joint), BigInt(16777216) * 451584);
  EXPECT_EQ(DesignSpace(space_with(4)).cardinality(CardinalityLevel::Operations), BigInt(256));
}

TEST(Canonicalize, MergesSampleRuns) {
  const FunctionSet fs;
  const Genotype g = make_genotype({O::Sample, O::Sample, O::Aggregate, O::Combine}, fs, fs);
  const Genotype c = canonicalize(g);
  EXPECT_EQ(c.positions[0].op, O::Connect);
  EXPECT_TRUE(c.positions[0].forced_identity);
  EXPECT_EQ(c.positions[1].op, O::Sample);
  EXPECT_EQ(c.positions[2].op, O::Aggregate);

  const Genotype triple = make_genotype({O::Sample, O::Sample, O::Sample, O::Aggregate}, fs, fs);
  const Genotype ct = canonicalize(triple);
  EXPECT_TRUE(ct.positions[0].forced_identity);
  EXPECT_TRUE(ct.positions[1].forced_identity);
  EXPECT_EQ(ct.positions[2].op, O::Sample);
}

TEST(Canonicalize, FixedPointWithoutAdjacentSamples) {
  const Genotype g = dgcnn_preset();
  EXPECT_EQ(canonicalize(g), g);
}

TEST(Canonicalize, Idempotent) {
  const DesignSpace space(SpaceConfig{});
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Genotype c = canonicalize(space.sample(derive_seed(1, s)));
    ASSERT_EQ(canonicalize(c), c);
    ASSERT_TRUE(space.validate(c).ok());
  }
}

TEST(Canonicalize, ImplicitSample) {
  const FunctionSet fs;
  EXPECT_TRUE(needs_implicit_sample(make_genotype({O::Aggregate, O::Sample}, fs, fs)));
  EXPECT_FALSE(needs_implicit_sample(make_genotype({O::Sample, O::Aggregate}, fs, fs)));
  EXPECT_FALSE(needs_implicit_sample(make_genotype({O::Combine, O::Connect}, fs, fs)));
}

TEST(Validate, Violations) {
  const DesignSpace space(SpaceConfig{});
  EXPECT_TRUE(space.validate(dgcnn_preset()).ok());

  Genotype bad_dim = dgcnn_preset();
  bad_dim.upper.combine_dim = 100;
  EXPECT_TRUE(has_violation(space.validate(bad_dim), "combine_dim not in table"));

  Genotype short_g = dgcnn_preset();
  short_g.positions.pop_back();
  EXPECT_TRUE(has_violation(space.validate(short_g), "length mismatch"));
}

TEST(Mutate, RateZeroIsIdentity) {
  const DesignSpace space(SpaceConfig{});
  const Genotype g = space.sample(1);
  EXPECT_EQ(space.mutate(g, 0.0, 99), g);
  EXPECT_THROW(space.mutate(g, 1.5, 99), ConfigError);
}

TEST(Mutate, RateOneStaysValid) {
  const DesignSpace space(SpaceConfig{});
  for (std::uint64_t s = 0; s < 200; ++s) {
    EXPECT_TRUE(space.validate(space.mutate(space.sample(s), 1.0, s + 1)).ok());
  }
}

TEST(Mutate, ChangedPositionCount) {
  const DesignSpace space(SpaceConfig{});
  const Genotype g = space.sample(5);
  double total = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Genotype m = space.mutate(g, 0.1, derive_seed(2, s));
    for (std::size_t i = 0; i < g.size(); ++i) total += m.positions[i].op != g.positions[i].op;
  }
  const double mean = total / 1000.0;
  EXPECT_GE(mean, 0.8);
  EXPECT_LE(mean, 1.6);
}

TEST(Crossover, IdenticalParents) {
  const DesignSpace space(SpaceConfig{});
  const Genotype a = space.sample(3);
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_EQ(space.crossover(a, a, s), a);
}

TEST(Crossover, ExplicitCut) {
  const DesignSpace space(SpaceConfig{});
  const Genotype a = space.sample(10);
  const Genotype b = space.sample(11);
  const Genotype c = crossover_at(a, b, 5, true, false);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(c.positions[i], a.positions[i]);
  for (std::size_t i = 5; i < 12; ++i) EXPECT_EQ(c.positions[i], b.positions[i]);
  EXPECT_EQ(c.upper, a.upper);
  EXPECT_EQ(c.lower, b.lower);
}

TEST(Crossover, OffspringValid) {
  const DesignSpace space(SpaceConfig{});
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Genotype c = space.crossover(space.sample(2 * s), space.sample(2 * s + 1), s);
    ASSERT_TRUE(space.validate(c).ok());
  }
  const DesignSpace small(space_with(4));
  EXPECT_THROW(space.crossover(space.sample(1), small.sample(1), 0), ConfigError);
}

TEST(Preset, Dgcnn) {
  const Genotype g = dgcnn_preset();
  ASSERT_EQ(g.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    const O expected = std::array{O::Sample, O::Aggregate, O::Combine}[i % 3];
    EXPECT_EQ(g.positions[i].op, expected);
  }
  EXPECT_EQ(g.upper.message_type, MessageType::TargetConcatRelative);
  EXPECT_EQ(g.upper.aggregator, Aggregator::Sum);
  EXPECT_EQ(g.upper.sample_fn, SampleFn::Knn);
  EXPECT_EQ(g.upper.combine_dim, 64);
  EXPECT_EQ(g.upper, g.lower);
}

TEST(GenotypeIo, RoundTrip) {
  const DesignSpace space(SpaceConfig{});
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Genotype g = canonicalize(space.sample(s));
    const std::string text = genotype_to_string(g);
    EXPECT_EQ(text.find('\n'), std::string::npos);
    EXPECT_EQ(parse_genotype(text), g);
  }
  EXPECT_NE(genotype_to_string(dgcnn_preset()).find("\"target_concat_relative\""),
            std::string::npos);
  EXPECT_THROW(parse_genotype(R"({"positions":["bogus"],"upper":{},"lower":{}})"), FormatError);
}
