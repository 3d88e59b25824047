#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabclust/common.hpp"
#include "tabclust/data.hpp"
#include "tabclust/deepcluster.hpp"
#include "tabclust/ensemble.hpp"
#include "tabclust/metrics.hpp"
#include "tabclust/traditional.hpp"

namespace tabclust {

enum class EpochsProfile { Desk, Paper };

const char* to_string(EpochsProfile p);
EpochsProfile profile_from_string(const std::string& s);

enum class MethodKind {
  KMeansX,
  GmmX,
  KMeansZ,
  GmmZ,
  DeepStudentT,       // DEC-style: clustering loss only
  DeepStudentTRecon,  // IDEC-style: clustering + reconstruction
  DeepGaussian,
  DeepGaussianSweep,
  Kgg,
};

const char* to_string(MethodKind k);
MethodKind method_kind_from_string(const std::string& s);

// A method with its hyperparameters fully resolved against the epochs profile.
struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::KMeansX;
  nlohmann::json params = nlohmann::json::object();  // user overrides as given

  std::optional<std::uint64_t> seed;  // overrides the experiment seed
  KMeansOptions kmeans;
  GmmOptions gmm;
  DeepClusterConfig deep;            // kinds that train an autoencoder
  std::vector<int> sweep_dims;       // empty: 2, 5, ... up to the feature count
  std::vector<std::string> voters;   // kgg only, in vote order

  bool uses_autoencoder() const;
  nlohmann::json resolved_json() const;
};

// Builds a method from its JSON node {"name", "kind", "params"}. `path` prefixes
// validation messages (e.g. "methods[2]").
MethodSpec parse_method(const nlohmann::json& j, EpochsProfile profile, const std::string& path);

struct CohortRule {
  std::string name;
  std::optional<std::size_t> n_samples;
  std::optional<double> class_ratio;
  std::optional<std::string> filter_column;  // csv sources: keep rows where column == value
  double filter_value = 0.0;
  nlohmann::json synthetic = nlohmann::json::object();  // synthetic sources: spec overrides
};

struct PreprocessConfig {
  bool apply_bounds = true;
  double max_missing_rate = 0.05;
  bool standardize = true;
};

struct DataSource {
  std::optional<SyntheticSpec> synthetic;
  std::filesystem::path csv_path;
  std::filesystem::path schema_path;
  std::string label_column = "label";
  std::vector<std::string> missing_tokens{"", "NA"};
};

struct ExperimentConfig {
  DataSource data;
  std::vector<CohortRule> cohorts;
  std::vector<MethodSpec> methods;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "results";
  EpochsProfile profile = EpochsProfile::Desk;
  PreprocessConfig preprocess;
  unsigned threads = 1;
  nlohmann::json raw;  // the document as parsed, recorded in the manifest
};

// Relative csv/schema paths resolve against `base_dir`. Throws
// Error(InvalidConfig) with the offending field path.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Per-profile cohort size when a cohort rule does not give one (desk: 2000,
// paper: no subsampling).
std::optional<std::size_t> default_cohort_size(EpochsProfile profile);

// Applies bounds, the missing-rate filter, the cohort subsample, median
// imputation and standardisation, in that order.
Dataset preprocess_cohort(const Dataset& raw, const PreprocessConfig& pre, std::optional<std::size_t> n_samples,
                          std::optional<double> class_ratio, std::uint64_t seed);

struct MethodResult {
  Labels labels;
  std::optional<Matrix> embedding;
  std::vector<double> pretrain_loss;
  std::vector<double> recon_history, kl_history, joint_history;
  std::optional<SweepResult> sweep;
};

// Fits one non-ensemble method on a preprocessed feature matrix.
MethodResult run_method(const MethodSpec& method, const Matrix& X, int k, std::uint64_t seed, unsigned threads = 1);

struct CellOutcome {
  std::string cohort;
  std::string method;
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  MethodResult result;
};

struct ExperimentReport {
  std::vector<ScoreReport> scores;  // successful cells, cohort-major in config order
  std::vector<RankSummary> ranks;
  std::vector<CellOutcome> cells;
  std::vector<std::string> unranked;  // methods missing a score in some cohort
  nlohmann::json manifest;
};

// Runs every cohort x method cell and writes the report files into
// config.output_dir. A failing cell is recorded and the grid continues.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace tabclust
