#include "tabclust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tabclust {

namespace {

void require_same_length(const Labels& a, const Labels& b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " labels");
}

double choose2(long long x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

// Minimum-cost perfect assignment on a square matrix (shortest augmenting
// paths with potentials, O(n^3)). Returns row -> column.
std::vector<int> min_cost_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double optimal_value(const Matrix& weight) {
  if (weight.rows() == 0) return 0.0;
  const Matrix cost = weight.maxCoeff() - weight.array();
  const auto a = min_cost_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < weight.rows(); ++i) total += weight(i, a[static_cast<std::size_t>(i)]);
  return total;
}

Matrix drop_row_col(const Matrix& m, Eigen::Index r, Eigen::Index c) {
  const Eigen::Index n = m.rows();
  Matrix out(n - 1, n - 1);
  for (Eigen::Index i = 0, oi = 0; i < n; ++i) {
    if (i == r) continue;
    for (Eigen::Index j = 0, oj = 0; j < n; ++j) {
      if (j == c) continue;
      out(oi, oj++) = m(i, j);
    }
    ++oi;
  }
  return out;
}

}  // namespace

ContingencyTable contingency(const Labels& truth, const Labels& pred) {
  require_same_length(truth, pred);
  ContingencyTable t;
  if (truth.empty()) {
    t.counts.resize(0, 0);
    return t;
  }
  const auto check = [](int l) {
    if (l < 0) throw Error(ErrorKind::DegenerateInput, "negative label");
  };
  std::for_each(truth.begin(), truth.end(), check);
  std::for_each(pred.begin(), pred.end(), check);
  const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
  const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
  t.counts = decltype(t.counts)::Zero(kt, kp);
  for (std::size_t i = 0; i < truth.size(); ++i) ++t.counts(truth[i], pred[i]);
  t.n = static_cast<long long>(truth.size());
  return t;
}

std::vector<int> hungarian_max(const Matrix& weight) {
  if (weight.rows() != weight.cols())
    throw Error(ErrorKind::NonSquare, std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()));
  const Eigen::Index n = weight.rows();
  if (n == 0) return {};
  const double scale = 1.0 + weight.cwiseAbs().maxCoeff() * static_cast<double>(n);
  const double tol = 1e-12 * scale;

  // Fix rows in order, taking the smallest column that keeps the remainder optimal.
  std::vector<int> result(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n)), cols(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  Matrix rest = weight;
  double target = optimal_value(rest);
  for (Eigen::Index step = 0; step < n; ++step) {
    const Eigen::Index size = rest.rows();
    for (Eigen::Index c = 0; c < size; ++c) {
      const Matrix sub = drop_row_col(rest, 0, c);
      const double value = rest(0, c) + optimal_value(sub);
      if (value >= target - tol || c == size - 1) {
        result[static_cast<std::size_t>(rows.front())] = static_cast<int>(cols[static_cast<std::size_t>(c)]);
        rows.erase(rows.begin());
        cols.erase(cols.begin() + c);
        target -= rest(0, c);
        rest = sub;
        break;
      }
    }
  }
  return result;
}

double acc(const Labels& truth, const Labels& pred) {
  require_same_length(truth, pred);
  if (truth.empty()) throw Error(ErrorKind::TooFewSamples, "acc needs at least one sample");
  const auto table = contingency(truth, pred);
  const Eigen::Index k = std::max(table.counts.rows(), table.counts.cols());
  // weight(pred cluster, true class)
  Matrix w = Matrix::Zero(k, k);
  for (Eigen::Index a = 0; a < table.counts.rows(); ++a)
    for (Eigen::Index b = 0; b < table.counts.cols(); ++b) w(b, a) = static_cast<double>(table.counts(a, b));
  const auto mapping = hungarian_max(w);
  double matched = 0.0;
  for (Eigen::Index b = 0; b < k; ++b) matched += w(b, mapping[static_cast<std::size_t>(b)]);
  return matched / static_cast<double>(table.n);
}

double nmi(const Labels& truth, const Labels& pred) {
  require_same_length(truth, pred);
  if (truth.empty()) throw Error(ErrorKind::TooFewSamples, "nmi needs at least one sample");
  const auto table = contingency(truth, pred);
  const double n = static_cast<double>(table.n);

  auto entropy = [n](const auto& marginal) {
    std::vector<double> terms;
    for (Eigen::Index i = 0; i < marginal.size(); ++i) {
      const double c = static_cast<double>(marginal(i));
      if (c > 0) terms.push_back(-(c / n) * std::log(c / n));
    }
    std::sort(terms.begin(), terms.end());
    return std::accumulate(terms.begin(), terms.end(), 0.0);
  };
  const Eigen::Matrix<long long, Eigen::Dynamic, 1> rows = table.counts.rowwise().sum();
  const Eigen::Matrix<long long, Eigen::Dynamic, 1> cols = table.counts.colwise().sum().transpose();
  const double h_truth = entropy(rows);
  const double h_pred = entropy(cols);
  const bool truth_trivial = rows.count() <= 1;
  const bool pred_trivial = cols.count() <= 1;
  if (truth_trivial && pred_trivial) return 1.0;
  if (truth_trivial || pred_trivial) return 0.0;

  // Terms are summed in sorted order so swapping arguments is bit-exact.
  std::vector<double> terms;
  for (Eigen::Index a = 0; a < table.counts.rows(); ++a)
    for (Eigen::Index b = 0; b < table.counts.cols(); ++b) {
      const double c = static_cast<double>(table.counts(a, b));
      if (c == 0) continue;
      const double ra = static_cast<double>(rows(a));
      const double cb = static_cast<double>(cols(b));
      terms.push_back((c / n) * (std::log(c * n) - std::log(ra * cb)));
    }
  std::sort(terms.begin(), terms.end());
  const double mi = std::accumulate(terms.begin(), terms.end(), 0.0);
  const double denom = std::min(h_truth, h_pred) + std::max(h_truth, h_pred);
  return std::clamp(2.0 * mi / denom, 0.0, 1.0);
}

double ari(const Labels& truth, const Labels& pred) {
  require_same_length(truth, pred);
  if (truth.size() < 2) throw Error(ErrorKind::TooFewSamples, "ari needs at least two samples");
  const auto table = contingency(truth, pred);
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (Eigen::Index a = 0; a < table.counts.rows(); ++a)
    for (Eigen::Index b = 0; b < table.counts.cols(); ++b) index += choose2(table.counts(a, b));
  for (Eigen::Index a = 0; a < table.counts.rows(); ++a) sum_rows += choose2(table.counts.row(a).sum());
  for (Eigen::Index b = 0; b < table.counts.cols(); ++b) sum_cols += choose2(table.counts.col(b).sum());
  const double expected = sum_rows * sum_cols / choose2(table.n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ScoreReport score(const std::string& method, const std::string& cohort, const Labels& truth,
                  const Labels& pred, double wall_clock_seconds) {
  return ScoreReport{method, cohort, acc(truth, pred), ari(truth, pred), nmi(truth, pred),
                     wall_clock_seconds};
}

std::vector<double> descending_mid_ranks(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> ranks(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
    i = j + 1;
  }
  return ranks;
}

std::vector<RankSummary> average_rank(const std::vector<ScoreReport>& scores) {
  std::vector<std::string> methods, cohorts;
  std::map<std::pair<std::string, std::string>, const ScoreReport*> grid;
  for (const auto& s : scores) {
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
    if (std::find(cohorts.begin(), cohorts.end(), s.cohort) == cohorts.end()) cohorts.push_back(s.cohort);
    if (!grid.emplace(std::pair{s.method, s.cohort}, &s).second)
      throw Error(ErrorKind::InvalidConfig, "duplicate score for " + s.method + " on " + s.cohort);
  }

  static constexpr std::array<const char*, 3> metric_names{"acc", "ari", "nmi"};
  std::vector<std::vector<double>> per_method(methods.size());
  for (const auto& cohort : cohorts) {
    for (std::size_t m = 0; m < metric_names.size(); ++m) {
      std::vector<double> cell;
      for (const auto& method : methods) {
        auto it = grid.find({method, cohort});
        if (it == grid.end())
          throw Error(ErrorKind::IncompleteGrid,
                      method + " missing in cell (" + cohort + ", " + metric_names[m] + ")");
        const ScoreReport& r = *it->second;
        cell.push_back(m == 0 ? r.acc : (m == 1 ? r.ari : r.nmi));
      }
      const auto ranks = descending_mid_ranks(cell);
      for (std::size_t i = 0; i < methods.size(); ++i) per_method[i].push_back(ranks[i]);
    }
  }

  std::vector<RankSummary> out;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const auto& r = per_method[i];
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    double var = 0.0;
    for (double x : r) var += (x - mean) * (x - mean);
    var /= static_cast<double>(r.size());
    out.push_back(RankSummary{methods[i], mean, std::sqrt(var), r.size()});
  }
  return out;
}

}  // namespace tabclust
