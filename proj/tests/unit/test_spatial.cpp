#include <gtest/gtest.h>

#include "l2r/error.hpp"
#include "l2r/spatial.hpp"
#include "oracles.hpp"

using namespace l2r;
using namespace l2r::spatial;

TEST(KdTree, EmptyAndSingle) {
  const KdTree empty{std::vector<Vec3>{}};
  EXPECT_TRUE(empty.k_nearest({0, 0, 0}, 3).empty());
  EXPECT_FALSE(empty.nearest({0, 0, 0}).has_value());
  const KdTree one{std::vector<Vec3>{{1, 2, 3}}};
  EXPECT_TRUE(one.k_nearest_of(0, 1).empty());
  EXPECT_TRUE(one.k_nearest({1, 2, 3}, 1, true).empty());
}

TEST(KdTree, NonFiniteCoordinateIsDomainError) {
  EXPECT_THROW(KdTree(std::vector<Vec3>{{0, 0, std::nan("")}}), DomainError);
}

TEST(KdTree, EqualDistancesBreakTiesByIndex) {
  const KdTree tree{std::vector<Vec3>{{1, 1, 0}, {-1, 1, 0}, {-1, -1, 0}, {1, -1, 0}}};
  const auto hits = tree.k_nearest({0, 0, 0}, 4);
  ASSERT_EQ(hits.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(hits[i].index, i);
}

TEST(KdTree, CollinearHandCase) {
  const KdTree tree{std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}}};
  const auto hits = tree.k_nearest({0, 0, 0}, 2, true);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0], (Neighbor{1, 1.0}));
  EXPECT_EQ(hits[1], (Neighbor{2, 3.0}));
}

TEST(KdTree, ZeroKIsContractError) {
  const KdTree tree{std::vector<Vec3>{{0, 0, 0}}};
  EXPECT_THROW(tree.k_nearest({0, 0, 0}, 0), ContractError);
}

TEST(KdTreeProperty, MatchesBruteForceIncludingDuplicates) {
  CounterRng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    auto pts = oracle::random_points(300 + rng.below(700), rng);
    // Duplicates and a lattice exercise the tie rules.
    for (int i = 0; i < 50; ++i) pts.push_back(pts[rng.below(pts.size())]);
    for (int i = 0; i < 27; ++i) pts.push_back({double(i % 3), double(i / 3 % 3), double(i / 9)});
    const KdTree tree(pts, 1 + rng.below(12));
    for (int q = 0; q < 100; ++q) {
      const Vec3 query = q % 4 == 0 ? pts[rng.below(pts.size())]
                                    : Vec3{rng.uniform(-12, 12), rng.uniform(-12, 12), rng.uniform(-12, 12)};
      const std::size_t k = 1 + rng.below(20);
      const auto got = tree.k_nearest(query, k);
      const auto want = oracle::knn(pts, query, k);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].index, want[i].index);
        EXPECT_EQ(got[i].distance, want[i].distance);
      }
    }
  }
}

TEST(KdTree, WithinRadiusIsStrict) {
  const KdTree tree{std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}};
  EXPECT_EQ(tree.within_radius({0, 0, 0}, 1.0), (std::vector<std::size_t>{0}));
  EXPECT_EQ(tree.within_radius({0, 0, 0}, 1.5), (std::vector<std::size_t>{0, 1}));
}

TEST(Thin, HandCases) {
  const std::vector<Vec3> line{{0, 0, 0}, {0.05, 0, 0}, {0.2, 0, 0}};
  EXPECT_EQ(thin_redundant(line, 0.1), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(thin_redundant(line, 0.0), (std::vector<std::size_t>{0, 1, 2}));
  const std::vector<Vec3> far{{0, 0, 0}, {5, 0, 0}, {0, 5, 0}};
  EXPECT_EQ(thin_redundant(far, 1.0), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(ThinProperty, SpacingIdempotenceAndCoverage) {
  CounterRng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = oracle::random_points(400, rng, 3.0);
    const double thr = rng.uniform(0.1, 1.0);
    const auto kept = thin_redundant(pts, thr);
    std::vector<Vec3> kept_pts;
    for (auto i : kept) kept_pts.push_back(pts[i]);
    EXPECT_GE(oracle::min_pairwise_distance(kept_pts), thr);
    const auto again = thin_redundant(kept_pts, thr);
    EXPECT_EQ(again.size(), kept_pts.size());
    // Every dropped point lies within the threshold of an earlier kept point.
    std::size_t pos = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pos < kept.size() && kept[pos] == i) {
        ++pos;
        continue;
      }
      bool covered = false;
      for (std::size_t j = 0; j < pos; ++j) covered |= oracle::d2(pts[i], pts[kept[j]]) < thr * thr;
      EXPECT_TRUE(covered);
    }
  }
}
