// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tabclust/data.hpp"
#include "tabclust/deepcluster.hpp"
#include "tabclust/ensemble.hpp"
#include "tabclust/experiment.hpp"
#include "tabclust/metrics.hpp"
#include "tabclust/report.hpp"
#include "tabclust/traditional.hpp"

using namespace tabclust;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_lines(const fs::path& p) {
  const auto text = slurp(p);
  const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  return lines == 0 ? 0 : lines - 1;
}

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> nd(2, 8), kd(1, 3);  // ARI needs two samples
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(nd(rng));
    const auto a = oracle::random_labels(n, kd(rng), rng), b = oracle::random_labels(n, kd(rng), rng);
    worst = std::max({worst, std::abs(acc(a, b) - oracle::brute_force_acc(a, b)),
                      std::abs(ari(a, b) - oracle::pair_enumeration_ari(a, b)),
                      std::abs(nmi(a, b) - oracle::entropy_nmi(a, b))});
  }
  o.check(worst <= 1e-12, "max deviation " + fmt("%.3g", worst));
  if (o.ok) o.detail = "max deviation " + fmt("%.3g", worst);
  return o;
}

Outcome hungarian() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> kd(1, 6), small(0, 3);
  std::uniform_real_distribution<double> u(-5, 5);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const int k = kd(rng);
    Matrix w(k, k);
    // Half the matrices use a few integer values so ties are common.
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = t % 2 ? small(rng) : u(rng);
    if (hungarian_max(w) != oracle::brute_force_assignment(w)) ++mismatches;
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " of 200 assignments differ");
  return o;
}

Outcome gradients() {
  Outcome o;
  double worst = 0;
  std::uint64_t seed = 1;
  for (Variant v : {Variant::StudentT, Variant::Gaussian})
    for (Activation act : {Activation::Relu, Activation::Tanh})
      for (int hidden = 0; hidden <= 2; ++hidden)
        for (int d = 1; d <= 4; ++d)
          for (int m : {1, 8}) {
            auto p = gradcheck::make_problem(seed++, hidden, d, m, v, act);
            worst = std::max(worst, gradcheck::max_error(p));
            p.reconstruction = false;  // clustering term on its own
            worst = std::max(worst, gradcheck::max_error(p));
          }
  o.check(worst < 1e-4, "max relative error " + fmt("%.3g", worst));
  if (o.ok) o.detail = "max relative error " + fmt("%.3g", worst);
  return o;
}

Outcome monotonicity() {
  Outcome o;
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> kd(2, 4), dd(1, 5), nd(30, 200);
  std::normal_distribution<double> g(0, 1);
  for (int t = 0; t < 50 && o.ok; ++t) {
    const int k = kd(rng), d = dd(rng), n = nd(rng);
    Matrix centres(k, d), X(n, d);
    for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = 3 * g(rng);
    for (int i = 0; i < n; ++i) X.row(i) = centres.row(i % k) + RowVector::NullaryExpr(d, [&] { return g(rng); });
    const auto km = kmeans_fit(X, k, static_cast<std::uint64_t>(t));
    for (std::size_t i = 1; i < km.inertia_history.size(); ++i)
      o.check(km.inertia_history[i] <= km.inertia_history[i - 1], "k-means inertia rose on dataset " + std::to_string(t));
    const auto gm = gmm_fit(X, k, static_cast<std::uint64_t>(t));
    for (std::size_t i = 1; i < gm.log_likelihood_history.size(); ++i)
      o.check(gm.log_likelihood_history[i] - gm.log_likelihood_history[i - 1] >= -1e-9,
              "GMM log-likelihood fell on dataset " + std::to_string(t));
  }
  return o;
}

Outcome loss_identities() {
  Outcome o;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1);
  Matrix S(50, 3);
  for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = u(rng);
  S.array().colwise() /= S.rowwise().sum().array();
  const Matrix T = target_distribution(S);
  o.check(std::abs(kl_loss(T, T)) <= 1e-12, "kl_loss(T, T) != 0");
  o.check((T.rowwise().sum().array() - 1).abs().maxCoeff() <= 1e-9, "target rows do not sum to 1");
  Matrix X(50, 4), Xhat(50, 4);
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    X.data()[i] = u(rng);
    Xhat.data()[i] = u(rng);
  }
  o.check(joint_loss(X, Xhat, T, S, 0.0) == reconstruction_loss(X, Xhat), "gamma = 0 joint loss differs");

  const auto ds = standardize(generate_synthetic({300, 8, 0.5, 2.0, ClusterShape::Spherical, 0.0, 4})).first;
  for (Variant v : {Variant::StudentT, Variant::Gaussian}) {
    DeepClusterConfig c;
    c.variant = v;
    c.gamma = 0.0;
    c.embed_dim = 3;
    c.hidden = {16, 16, 32};
    c.train.epochs = 30;
    c.train.batch_size = 64;
    c.train.seed = 17;
    c.finetune_epochs = 20;
    const Matrix Z = encode(pretrain_autoencoder(ds.X, c).model, ds.X);
    Labels hybrid;
    if (v == Variant::StudentT) {
      hybrid = kmeans_fit(Z, 2, c.train.seed).labels;
    } else {
      GmmOptions g;
      g.reg_covar = c.reg_covar;
      hybrid = gmm_predict(gmm_fit(Z, 2, c.train.seed, g), Z).labels;
    }
    o.check(train_deep_cluster(ds.X, 2, c).labels == hybrid,
            std::string("gamma = 0 fine-tune differs from hybrid labels (") + to_string(v) + ")");
  }
  return o;
}

Outcome ensembles() {
  Outcome o;
  auto lm = [](std::vector<Labels> runs) {
    LabelMatrix m;
    m.runs = std::move(runs);
    return m;
  };
  o.check(dimension_ensemble(lm({{1, 0}, {1, 0}, {0, 1}})) == Labels({1, 0}), "(1,1,0) average");
  o.check(dimension_ensemble(lm({{1, 1}, {0, 1}})) == Labels({1, 1}), "0.5 threshold tie");
  o.check(dimension_ensemble(lm({{0, 0, 1, 1}, {1, 1, 0, 0}, {0, 1, 1, 1}})) == Labels({0, 0, 1, 1}),
          "flipped run not aligned");
  o.check(majority_vote(lm({{0, 1, 0, 1}, {0, 1, 1, 1}})) == Labels({0, 1, 1, 1}), "majority tie");

  std::mt19937_64 rng(3);
  const auto truth = oracle::random_labels(30, 2, rng);
  LabelMatrix voters;
  for (int v = 0; v < 3; ++v) {
    Labels l = truth;
    for (int i = 3 * v; i < 3 * v + 3; ++i) l[static_cast<std::size_t>(i)] = 1 - l[static_cast<std::size_t>(i)];
    if (v == 2)
      for (auto& x : l) x = 1 - x;
    voters.runs.push_back(l);
  }
  o.check(acc(truth, majority_vote(voters)) == 1.0, "disjoint-error voters not perfect");
  o.check(acc(truth, dimension_ensemble(voters)) == 1.0, "disjoint-error runs not perfect");

  // Every ordering of the runs gives the same partition. Outputs are named
  // after runs[0], so reordering the later runs gives identical vectors.
  auto perm = voters;
  std::sort(perm.runs.begin(), perm.runs.end());
  do {
    o.check(ari(majority_vote(voters), majority_vote(perm)) == 1.0, "majority vote depends on voter order");
    o.check(ari(dimension_ensemble(voters), dimension_ensemble(perm)) == 1.0, "dimension ensemble depends on order");
  } while (std::next_permutation(perm.runs.begin(), perm.runs.end()));
  for (int t = 0; t < 200; ++t) {
    LabelMatrix m;
    for (int r = 0; r < 2 + t % 5; ++r) m.runs.push_back(oracle::random_labels(25, 2, rng));
    const auto mv = majority_vote(m), de = dimension_ensemble(m);
    std::shuffle(m.runs.begin() + 1, m.runs.end(), rng);
    o.check(majority_vote(m) == mv && dimension_ensemble(m) == de, "output changed when later runs were shuffled");
  }
  return o;
}

struct BenchmarkRun {
  ExperimentReport report;
  double seconds = 0;
};

BenchmarkRun run_benchmark(const fs::path& out, std::optional<unsigned> threads) {
  std::ifstream in(TABCLUST_SOURCE_DIR "/configs/benchmark_desk.json");
  auto j = nlohmann::json::parse(in);
  j["output_dir"] = out.string();
  if (threads) j["threads"] = *threads;
  const auto t0 = std::chrono::steady_clock::now();
  BenchmarkRun r;
  r.report = run_experiment(parse_experiment_config(j, TABCLUST_SOURCE_DIR "/configs"));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

const fs::path kBenchA = fs::temp_directory_path() / "tabclust_acceptance_a";
const fs::path kBenchB = fs::temp_directory_path() / "tabclust_acceptance_b";

Outcome benchmark() {
  Outcome o;
  fs::remove_all(kBenchA);
  const auto run = run_benchmark(kBenchA, std::nullopt);
  const auto& rep = run.report;
  o.check(run.seconds < 600, "grid took " + fmt("%.1f s", run.seconds));

  const auto manifest = nlohmann::json::parse(slurp(kBenchA / "manifest.json"));
  const auto& cohort = manifest["cohorts"][0];
  o.check(cohort["n_samples"] == 2000 && cohort["n_features"] == 33, "cohort is not 2000 x 33");
  const auto truth = read_labels_csv(kBenchA / "truth" / "synthetic.csv");
  const auto minority = static_cast<double>(std::count(truth.begin(), truth.end(), 1));
  const double ratio = std::min(minority, 2000 - minority) / std::max(minority, 2000 - minority);
  o.check(std::abs(ratio - 1 / 1.9) < 2e-3, "class ratio " + fmt("%.4f", ratio));

  const std::size_t n_methods = 10;
  std::size_t failed = 0;
  for (const auto& c : rep.cells) failed += !c.ok;
  o.check(failed == 0, std::to_string(failed) + " cells failed");
  o.check(data_lines(kBenchA / "scores.csv") == n_methods, "scores.csv incomplete");
  o.check(data_lines(kBenchA / "ranks.csv") == n_methods, "ranks.csv incomplete");
  o.check(data_lines(kBenchA / "timings.csv") == n_methods, "timings.csv incomplete");

  std::map<std::string, ScoreReport> by_method;
  for (const auto& s : read_scores_csv(kBenchA / "scores.csv")) by_method[s.method] = s;
  const double km_ari = by_method["kmeans_x"].ari;
  o.check(km_ari >= 0.2 && km_ari <= 0.8, "k-means ARI " + fmt("%.3f", km_ari) + " outside [0.2, 0.8]");
  std::vector<double> voter_acc{by_method["kmeans_x"].acc, by_method["gmm_x"].acc, by_method["gceals_ensemble"].acc};
  std::sort(voter_acc.begin(), voter_acc.end());
  const double kgg = by_method["kgg"].acc;
  o.check(kgg >= voter_acc[1], "KGG ACC " + fmt("%.4f", kgg) + " below voter median " + fmt("%.4f", voter_acc[1]));
  if (o.ok)
    o.detail = "grid " + fmt("%.1f s", run.seconds) + ", k-means ARI " + fmt("%.3f", km_ari) + ", KGG ACC " +
               fmt("%.4f", kgg) + " vs voter median " + fmt("%.4f", voter_acc[1]);
  return o;
}

Outcome preprocessing() {
  Outcome o;
  const auto schema = load_feature_specs(TABCLUST_SOURCE_DIR "/data/clinical_features.json");
  CsvOptions opts;
  opts.label_column = "label";
  const auto raw = load_csv(TABCLUST_TEST_DATA "/preprocess_fixture.csv", schema, opts);
  const auto expected = load_csv(TABCLUST_TEST_DATA "/preprocess_expected.csv", schema, opts);
  o.check(raw.n_samples() == 20, "fixture is not 20 rows");
  const auto out = impute_median(filter_missing_rate(apply_bounds(raw), 0.05));
  o.check(out.n_samples() == expected.n_samples(), "row count " + std::to_string(out.n_samples()));
  if (o.ok) {
    o.check(out.X == expected.X, "values differ from the expected output");
    o.check(*out.labels == *expected.labels, "labels differ from the expected output");
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  if (!fs::exists(kBenchA / "scores.csv")) {
    o.check(false, "first benchmark run missing");
    return o;
  }
  fs::remove_all(kBenchB);
  // The second run uses one worker, so scheduling differences are covered too.
  run_benchmark(kBenchB, 1u);
  o.check(slurp(kBenchA / "scores.csv") == slurp(kBenchB / "scores.csv"), "scores.csv differs between runs");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::tuple<int, std::string, double, std::function<Outcome()>>> criteria = {
      {1, "metric oracle equivalence", 5, metric_oracles},
      {2, "hungarian matches brute force", 5, hungarian},
      {3, "gradient fidelity", 30, gradients},
      {4, "EM and Lloyd monotonicity", 30, monotonicity},
      {5, "loss identities", 0, loss_identities},
      {6, "ensemble correctness", 0, ensembles},
      {7, "synthetic benchmark", 0, benchmark},
      {8, "preprocessing fixture", 0, preprocessing},
      {9, "end-to-end determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& [id, name, budget, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget > 0 && secs >= budget) o.check(false, "runtime " + fmt("%.2f s", secs) + " over budget");
    failures += !o.ok;
    std::printf("%s criterion %d: %s (%.2f s)%s%s\n", o.ok ? "PASS" : "FAIL", id, name.c_str(), secs,
                o.detail.empty() ? "" : " - ", o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(kBenchA);
  fs::remove_all(kBenchB);
  return failures == 0 ? 0 : 1;
}
