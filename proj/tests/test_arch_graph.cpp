#include <gtest/gtest.h>

#include <cmath>

#include "gnas/arch_graph.hpp"
#include "gnas/design_space.hpp"
#include "gnas/error.hpp"
#include "gnas/rng.hpp"

using namespace gnas;
using O = OperationKind;

namespace {

constexpr int kRoleConnect = 3;
constexpr int kRoleAggregate = 4;
constexpr int kRoleCombine = 5;
constexpr int kRoleSample = 6;

int chain_edges(const ArchGraph& ag) {
  const auto g = ag.global_index();
  int count = 0;
  for (Eigen::Index i = 0; i < ag.node_count(); ++i) {
    for (Eigen::Index j = 0; j < ag.node_count(); ++j) {
      if (i != g && j != g && ag.adjacency(i, j) != 0.0) ++count;
    }
  }
  return count;
}

}  // namespace

TEST(Encode, Combine64) {
  const FeatureVector f = encode_position(O::Combine, CombineFn{64});
  for (int i = 0; i < kRoleWidth; ++i) EXPECT_EQ(f[i], i == kRoleCombine ? 1.0 : 0.0);
  for (int i = 0; i < kFunctionWidth; ++i) {
    EXPECT_EQ(f[kRoleWidth + i], i == 5 ? 0.75 : 0.0) << i;
  }
}

TEST(Encode, AggregateSumRelative) {
  const FeatureVector f =
      encode_position(O::Aggregate, AggregateFn{Aggregator::Sum, MessageType::RelativePos});
  EXPECT_EQ(f[kRoleAggregate], 1.0);
  EXPECT_EQ(f[kRoleWidth + 0], 1.0);
  EXPECT_DOUBLE_EQ(f[kRoleWidth + 4], 2.0 / 6.0);
  EXPECT_EQ(f[kRoleWidth + 5], 0.0);
}

TEST(Encode, ConnectAndSampleSlots) {
  EXPECT_EQ(encode_position(O::Connect, ConnectFn::SkipConnect)[kRoleWidth + 6], 1.0);
  EXPECT_EQ(encode_position(O::Connect, ConnectFn::Identity)[kRoleWidth + 6], 0.0);
  EXPECT_EQ(encode_position(O::Connect, ConnectFn::Identity)[kRoleConnect], 1.0);
  EXPECT_EQ(encode_position(O::Sample, SampleFn::Knn)[kRoleWidth + 7], 1.0);
  EXPECT_EQ(encode_position(O::Sample, SampleFn::Random)[kRoleWidth + 7], 0.0);
  EXPECT_EQ(encode_position(O::Sample, SampleFn::Random)[kRoleSample], 1.0);
}

TEST(Encode, MismatchedPairRejected) {
  EXPECT_THROW(encode_position(O::Combine, SampleFn::Knn), ConfigError);
}

TEST(GlobalFeatures, Substitution) {
  const FeatureVector f = global_features(GraphStats{});
  const std::array<double, 7> expected{0.625, 0.3125, 0.25, 0.015625, 20.0 / 1023.0, 0.5, 1.0};
  for (int i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(f[i], expected[i]) << i;
  for (int i = 7; i < kFeatureWidth; ++i) EXPECT_EQ(f[i], 0.0);
}

TEST(GlobalFeatures, SinglePointDensityClamped) {
  GraphStats s;
  s.num_points = 1;
  EXPECT_EQ(global_features(s)[4], 1.0);
}

TEST(GlobalFeatures, Injective) {
  const GraphStats base;
  auto differs = [&](GraphStats s) { return global_features(s) != global_features(base); };
  GraphStats s = base;
  s.num_points = 2048;
  EXPECT_TRUE(differs(s));
  s = base;
  s.neighbors_per_node = 21;
  EXPECT_TRUE(differs(s));
  s = base;
  s.input_feature_dim = 6;
  EXPECT_TRUE(differs(s));
  s = base;
  s.batch_size = 2;
  EXPECT_TRUE(differs(s));
  s = base;
  s.weight_precision = 2;
  EXPECT_TRUE(differs(s));
  s = base;
  s.index_precision = 4;
  EXPECT_TRUE(differs(s));
}

TEST(ArchGraph, PresetShape) {
  const ArchGraph ag = build_arch_graph(dgcnn_preset(), GraphStats{});
  EXPECT_EQ(ag.node_count(), 15);
  EXPECT_EQ(ag.features.cols(), 16);
  const auto g = ag.global_index();
  EXPECT_EQ(g, 14);
  EXPECT_EQ(ag.adjacency.row(g).sum(), 14);
  EXPECT_EQ(ag.adjacency.col(g).sum(), 14);
  EXPECT_EQ(ag.adjacency(g, g), 0.0);
  EXPECT_EQ(ag.features.row(0).sum(), 0.0);
  EXPECT_EQ(ag.features.row(13).sum(), 0.0);
}

TEST(ArchGraph, TwoPositionEdgeCount) {
  const FunctionSet fs;
  const ArchGraph ag = build_arch_graph(make_genotype({O::Sample, O::Combine}, fs, fs), GraphStats{});
  EXPECT_EQ(ag.adjacency.sum(), 3 + 2 * 4);
  EXPECT_EQ(chain_edges(ag), 3);
  EXPECT_EQ(ag.adjacency(0, 1), 1.0);
  EXPECT_EQ(ag.adjacency(1, 2), 1.0);
  EXPECT_EQ(ag.adjacency(2, 3), 1.0);
}

TEST(ArchGraph, ChainIsAcyclic) {
  const DesignSpace space(SpaceConfig{});
  for (std::uint64_t s = 0; s < 100; ++s) {
    const ArchGraph ag = build_arch_graph(canonicalize(space.sample(s)), GraphStats{});
    const auto gi = ag.global_index();
    Eigen::MatrixXd a = ag.adjacency;
    a.row(gi).setZero();
    a.col(gi).setZero();
    // Kahn's algorithm.
    const auto m = a.rows();
    std::vector<int> indeg(m, 0);
    for (Eigen::Index j = 0; j < m; ++j) indeg[j] = static_cast<int>(a.col(j).sum());
    std::vector<Eigen::Index> ready;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (indeg[j] == 0) ready.push_back(j);
    }
    int visited = 0;
    while (!ready.empty()) {
      const auto i = ready.back();
      ready.pop_back();
      ++visited;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (a(i, j) != 0.0 && --indeg[j] == 0) ready.push_back(j);
      }
    }
    EXPECT_EQ(visited, m);
  }
}

TEST(ArchGraph, Properties) {
  const DesignSpace space(SpaceConfig{});
  GraphStats stats;
  stats.num_points = 300;
  stats.batch_size = 4;
  for (std::uint64_t s = 0; s < 300; ++s) {
    const Genotype g = canonicalize(space.sample(derive_seed(31, s)));
    const ArchGraph ag = build_arch_graph(g, stats);
    ASSERT_GE(ag.features.minCoeff(), 0.0);
    ASSERT_LE(ag.features.maxCoeff(), 1.0);
    int globals = 0;
    for (auto r : ag.roles) globals += r == NodeRole::Global;
    ASSERT_EQ(globals, 1);
    const FeatureVector gf = global_features(stats);
    for (int c = 0; c < kFeatureWidth; ++c) ASSERT_EQ(ag.features(ag.global_index(), c), gf[c]);
    const ArchGraph again = build_arch_graph(g, stats);
    ASSERT_TRUE(again.adjacency == ag.adjacency);
    ASSERT_TRUE(again.features == ag.features);
  }
}

TEST(ArchGraph, PermutationTracksGlobal) {
  const ArchGraph ag = build_arch_graph(dgcnn_preset(), GraphStats{});
  std::vector<Eigen::Index> perm(ag.node_count());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Eigen::Index>(perm.size() - 1 - i);
  const ArchGraph p = permute_nodes(ag, perm);
  EXPECT_EQ(p.global_index(), 0);
  EXPECT_TRUE(p.features.row(0) == ag.features.row(14));
  EXPECT_EQ(p.adjacency(14, 13), 1.0);  // old input -> old op_1
}
