#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tabclust/metrics.hpp"

using namespace tabclust;

TEST(Contingency, DiagonalForIdenticalLabels) {
  const auto t = contingency({0, 0, 1, 1}, {0, 0, 1, 1});
  ASSERT_EQ(t.counts.rows(), 2);
  EXPECT_EQ(t.counts(0, 0), 2);
  EXPECT_EQ(t.counts(1, 1), 2);
  EXPECT_EQ(t.counts(0, 1), 0);
  EXPECT_EQ(t.counts(1, 0), 0);
  EXPECT_EQ(t.n, 4);
}

TEST(Contingency, AllOnesForIndependentSplit) {
  const auto t = contingency({0, 0, 1, 1}, {0, 1, 0, 1});
  EXPECT_TRUE((t.counts.array() == 1).all());
}

TEST(Contingency, EmptyInput) {
  const auto t = contingency({}, {});
  EXPECT_EQ(t.counts.size(), 0);
  EXPECT_EQ(t.n, 0);
}

TEST(Contingency, LengthMismatch) {
  try {
    contingency({0, 1}, {0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(Hungarian, TwoByTwo) {
  Matrix w(2, 2);
  w << 4, 1, 2, 3;
  EXPECT_EQ(hungarian_max(w), (std::vector<int>{0, 1}));
}

TEST(Hungarian, DiagonalDominant) {
  Matrix w = Matrix::Identity(4, 4) * 10.0 + Matrix::Constant(4, 4, 1.0);
  EXPECT_EQ(hungarian_max(w), (std::vector<int>{0, 1, 2, 3}));
}

TEST(Hungarian, PicksAntiDiagonal) {
  Matrix w(3, 3);
  w << 0, 0, 5, 0, 5, 0, 5, 0, 0;
  EXPECT_EQ(hungarian_max(w), (std::vector<int>{2, 1, 0}));
}

TEST(Hungarian, AllTiesGiveIdentity) {
  EXPECT_EQ(hungarian_max(Matrix::Constant(3, 3, 2.0)), (std::vector<int>{0, 1, 2}));
}

TEST(Hungarian, RandomFiveByFiveMatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix w(5, 5);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    EXPECT_EQ(hungarian_max(w), oracle::brute_force_assignment(w)) << "trial " << trial;
  }
}

TEST(Hungarian, RejectsNonSquare) {
  try {
    hungarian_max(Matrix::Zero(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonSquare);
  }
}

TEST(Hungarian, EmptyMatrix) { EXPECT_TRUE(hungarian_max(Matrix(0, 0)).empty()); }

TEST(Acc, Examples) {
  EXPECT_DOUBLE_EQ(acc({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(acc({0, 0, 1, 1}, {1, 1, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(acc({0, 0, 1, 1}, {0, 1, 1, 1}), 0.75);
}

TEST(Acc, MorePredictedClustersThanClasses) {
  // Three predicted clusters against two classes: one cluster stays unmatched.
  EXPECT_DOUBLE_EQ(acc({0, 0, 1, 1}, {0, 1, 2, 2}), 0.75);
}

TEST(Nmi, Examples) {
  EXPECT_NEAR(nmi({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0, 1e-12);
  EXPECT_NEAR(nmi({0, 0, 1, 1}, {0, 1, 0, 1}), 0.0, 1e-12);
}

TEST(Nmi, SymmetricExactly) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto g = oracle::random_labels(40, 3, rng), p = oracle::random_labels(40, 4, rng);
    EXPECT_EQ(nmi(g, p), nmi(p, g));
  }
}

TEST(Nmi, TrivialPartitions) {
  EXPECT_DOUBLE_EQ(nmi({0, 0, 0}, {1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(nmi({0, 0, 0}, {0, 1, 0}), 0.0);
}

TEST(Ari, Examples) {
  EXPECT_DOUBLE_EQ(ari({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0);
  EXPECT_NEAR(ari({0, 0, 1, 1}, {0, 1, 0, 1}), -0.5, 1e-12);
}

TEST(Ari, TooFewSamples) {
  try {
    ari({0}, {0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewSamples);
  }
}

TEST(Ari, ChanceLevelNearZero) {
  std::mt19937_64 rng(2024);
  const auto g = oracle::random_labels(200, 2, rng);
  double total = 0;
  for (int t = 0; t < 1000; ++t) total += ari(g, oracle::random_labels(200, 2, rng));
  EXPECT_NEAR(total / 1000, 0.0, 0.02);
}

TEST(Metrics, MatchOraclesOnRandomPairs) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(2, 8), kd(1, 3);
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(size(rng));
    const auto g = oracle::random_labels(n, kd(rng), rng), p = oracle::random_labels(n, kd(rng), rng);
    EXPECT_NEAR(acc(g, p), oracle::brute_force_acc(g, p), 1e-12);
    EXPECT_NEAR(ari(g, p), oracle::pair_enumeration_ari(g, p), 1e-12);
    EXPECT_NEAR(nmi(g, p), oracle::entropy_nmi(g, p), 1e-12);
  }
}

TEST(Score, FillsAllFields) {
  const auto s = score("m", "c", {0, 0, 1, 1}, {1, 1, 0, 0});
  EXPECT_EQ(s.method, "m");
  EXPECT_EQ(s.cohort, "c");
  EXPECT_DOUBLE_EQ(s.acc, 1.0);
  EXPECT_DOUBLE_EQ(s.ari, 1.0);
  EXPECT_NEAR(s.nmi, 1.0, 1e-12);
}

namespace {
ScoreReport row(const std::string& m, const std::string& c, double a, double r, double n) {
  ScoreReport s;
  s.method = m;
  s.cohort = c;
  s.acc = a;
  s.ari = r;
  s.nmi = n;
  return s;
}
}  // namespace

TEST(AverageRank, StrictWinner) {
  const auto ranks = average_rank({row("a", "x", .9, .9, .9), row("b", "x", .5, .5, .5), row("a", "y", .8, .8, .8),
                                   row("b", "y", .1, .1, .1)});
  ASSERT_EQ(ranks.size(), 2u);
  EXPECT_EQ(ranks[0].method, "a");
  EXPECT_DOUBLE_EQ(ranks[0].mean_rank, 1.0);
  EXPECT_DOUBLE_EQ(ranks[0].std_rank, 0.0);
  EXPECT_EQ(ranks[0].cells, 6u);
}

TEST(AverageRank, TieTakesMidRank) {
  EXPECT_EQ(descending_mid_ranks({0.5, 0.5}), (std::vector<double>{1.5, 1.5}));
  EXPECT_EQ(descending_mid_ranks({0.2, 0.9, 0.2, 0.1}), (std::vector<double>{2.5, 1.0, 2.5, 4.0}));
}

TEST(AverageRank, HandComputedThreeMethods) {
  // cohort x: acc a>b>c, ari b>a=c, nmi a=b=c ; cohort y: acc c>b>a, ari a>b>c, nmi b>a>c
  const auto ranks = average_rank({row("a", "x", .9, .2, .5), row("b", "x", .8, .3, .5), row("c", "x", .7, .2, .5),
                                   row("a", "y", .1, .9, .4), row("b", "y", .2, .8, .6), row("c", "y", .3, .7, .3)});
  // a: 1, 2.5, 2, 3, 1, 2 -> 11.5/6 ; b: 2, 1, 2, 2, 2, 1 -> 10/6 ; c: 3, 2.5, 2, 1, 3, 3 -> 14.5/6
  ASSERT_EQ(ranks.size(), 3u);
  EXPECT_NEAR(ranks[0].mean_rank, 11.5 / 6, 1e-12);
  EXPECT_NEAR(ranks[1].mean_rank, 10.0 / 6, 1e-12);
  EXPECT_NEAR(ranks[2].mean_rank, 14.5 / 6, 1e-12);
  const std::vector<double> a{1, 2.5, 2, 3, 1, 2};
  double var = 0;
  for (double r : a) var += (r - 11.5 / 6) * (r - 11.5 / 6);
  EXPECT_NEAR(ranks[0].std_rank, std::sqrt(var / 6), 1e-12);
}

TEST(AverageRank, IncompleteGrid) {
  try {
    average_rank({row("a", "x", 1, 1, 1), row("b", "x", 1, 1, 1), row("a", "y", 1, 1, 1)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompleteGrid);
  }
}
