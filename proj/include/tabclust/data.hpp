#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabclust/common.hpp"

namespace tabclust {

using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct FeatureSpec {
  std::string name;
  std::string unit;
  double bound_lo = -std::numeric_limits<double>::infinity();
  double bound_hi = std::numeric_limits<double>::infinity();
};

// Tabular cohort. Missing cells hold NaN in X and true in `missing`.
// Ground-truth labels live beside X and never inside it.
struct Dataset {
  Matrix X;
  MissingMask missing;
  std::vector<FeatureSpec> feature_specs;
  std::optional<Labels> labels;
  std::vector<std::string> class_names;
  // Non-feature numeric columns (e.g. a grouping column), row-aligned with X.
  std::map<std::string, std::vector<double>> side_columns;

  Eigen::Index n_samples() const { return X.rows(); }
  Eigen::Index n_features() const { return X.cols(); }
  int n_classes() const;
  std::size_t missing_count() const { return static_cast<std::size_t>(missing.count()); }

  // New dataset holding only `rows`, in the given order.
  Dataset select_rows(const std::vector<Eigen::Index>& rows) const;
  // Throws Error(DegenerateInput) when a documented invariant is violated.
  void validate() const;
};

enum class ClusterShape { Spherical, Diagonal, Correlated };

struct SyntheticSpec {
  std::size_t n_samples = 2000;
  std::size_t n_features = 33;
  double class_ratio = 1.0 / 1.9;  // minority : majority
  double separation = 2.0;
  ClusterShape cluster_shape = ClusterShape::Spherical;
  double missing_rate = 0.0;
  std::uint64_t seed = 0;
};

struct ScalerParams {
  Vector means;
  Vector stds;

  Matrix apply(const Matrix& X) const;
};

struct CsvOptions {
  std::optional<std::string> label_column;
  std::vector<std::string> missing_tokens{"", "NA"};
  std::vector<std::string> side_columns;
};

// Feature schema I/O. Infinite bounds are written as JSON null.
std::vector<FeatureSpec> feature_specs_from_json(const nlohmann::json& j);
nlohmann::json feature_specs_to_json(const std::vector<FeatureSpec>& specs);
std::vector<FeatureSpec> load_feature_specs(const std::filesystem::path& path);
void validate_feature_specs(const std::vector<FeatureSpec>& specs);

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureSpec>& specs,
                 const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const std::vector<FeatureSpec>& specs,
                  const CsvOptions& options = {});
// Writes features (missing as empty cells) followed by `label_column` when labels exist.
void write_csv(const std::filesystem::path& path, const Dataset& ds,
               const std::string& label_column = "label");

Dataset apply_bounds(const Dataset& ds);
Dataset filter_missing_rate(const Dataset& ds, double max_rate);
Dataset impute_median(const Dataset& ds);
std::pair<Dataset, ScalerParams> standardize(const Dataset& ds);
Dataset stratified_subsample(const Dataset& ds, std::size_t n, double class_ratio,
                             std::uint64_t seed);
Dataset generate_synthetic(const SyntheticSpec& spec);

// Median of a non-empty sample; even counts average the two central values.
double median(std::vector<double> values);

}  // namespace tabclust
