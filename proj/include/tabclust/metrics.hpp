#pragma once

#include <map>
#include <string>
#include <vector>

#include "tabclust/common.hpp"

namespace tabclust {

struct ContingencyTable {
  // counts(a, b) = #{i : truth_i = a, pred_i = b}
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> counts;
  long long n = 0;
};

ContingencyTable contingency(const Labels& truth, const Labels& pred);

// Permutation p (row i -> column p[i]) maximising sum_i weight(i, p[i]).
// Among optimal permutations the lexicographically smallest is returned.
std::vector<int> hungarian_max(const Matrix& weight);

double acc(const Labels& truth, const Labels& pred);
double nmi(const Labels& truth, const Labels& pred);
double ari(const Labels& truth, const Labels& pred);

struct ScoreReport {
  std::string method;
  std::string cohort;
  double acc = 0.0;
  double ari = 0.0;
  double nmi = 0.0;
  double wall_clock_seconds = 0.0;
};

ScoreReport score(const std::string& method, const std::string& cohort, const Labels& truth,
                  const Labels& pred, double wall_clock_seconds = 0.0);

struct RankSummary {
  std::string method;
  double mean_rank = 0.0;
  double std_rank = 0.0;  // population standard deviation over cells
  std::size_t cells = 0;
};

// Ranks methods within every (cohort, metric) cell, descending by score with
// mid-ranks for ties, then summarises per method. Output keeps first-seen
// method order.
std::vector<RankSummary> average_rank(const std::vector<ScoreReport>& scores);

// Mid-ranks (1 = best) for scores sorted descending.
std::vector<double> descending_mid_ranks(const std::vector<double>& scores);

}  // namespace tabclust
