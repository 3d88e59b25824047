#include "tabclust/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <Eigen/Cholesky>

namespace tabclust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Comma-separated fields; double quotes group a field and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

double bound_from_json(const nlohmann::json& j, double fallback) {
  if (j.is_null()) return fallback;
  return j.get<double>();
}

nlohmann::json bound_to_json(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

const char* shape_name(ClusterShape s) {
  switch (s) {
    case ClusterShape::Spherical: return "spherical";
    case ClusterShape::Diagonal: return "diagonal";
    case ClusterShape::Correlated: return "correlated";
  }
  return "spherical";
}

}  // namespace

int Dataset::n_classes() const {
  if (!labels || labels->empty()) return 0;
  return *std::max_element(labels->begin(), labels->end()) + 1;
}

Dataset Dataset::select_rows(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.feature_specs = feature_specs;
  out.class_names = class_names;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.missing.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
    out.missing.row(static_cast<Eigen::Index>(r)) = missing.row(rows[r]);
  }
  if (labels) {
    Labels l(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) l[r] = (*labels)[static_cast<std::size_t>(rows[r])];
    out.labels = std::move(l);
  }
  for (const auto& [name, col] : side_columns) {
    std::vector<double> c(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) c[r] = col[static_cast<std::size_t>(rows[r])];
    out.side_columns.emplace(name, std::move(c));
  }
  return out;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(X.cols()) != feature_specs.size())
    throw Error(ErrorKind::DegenerateInput, "feature count does not match feature specs");
  if (missing.rows() != X.rows() || missing.cols() != X.cols())
    throw Error(ErrorKind::DegenerateInput, "missing mask shape does not match X");
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      if (!missing(i, j) && !std::isfinite(X(i, j)))
        throw Error(ErrorKind::DegenerateInput, "non-finite observed value at row " +
                                                    std::to_string(i) + ", column " +
                                                    feature_specs[static_cast<std::size_t>(j)].name);
  if (labels) {
    if (static_cast<Eigen::Index>(labels->size()) != X.rows())
      throw Error(ErrorKind::DegenerateInput, "label count does not match sample count");
    for (int l : *labels)
      if (l < 0) throw Error(ErrorKind::DegenerateInput, "negative label");
  }
}

Matrix ScalerParams::apply(const Matrix& X) const {
  if (X.cols() != means.size())
    throw Error(ErrorKind::DimensionMismatch, "scaler width does not match data");
  Matrix out = X.rowwise() - means.transpose();
  return out.array().rowwise() / stds.transpose().array();
}

void validate_feature_specs(const std::vector<FeatureSpec>& specs) {
  std::set<std::string> names;
  for (const auto& s : specs) {
    if (!(s.bound_lo < s.bound_hi))
      throw Error(ErrorKind::InvalidConfig, "feature '" + s.name + "' requires bound_lo < bound_hi");
    if (!names.insert(s.name).second)
      throw Error(ErrorKind::InvalidConfig, "duplicate feature name '" + s.name + "'");
  }
}

std::vector<FeatureSpec> feature_specs_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidConfig, "feature schema must be a JSON array");
  std::vector<FeatureSpec> specs;
  for (const auto& e : j) {
    FeatureSpec s;
    s.name = e.at("name").get<std::string>();
    s.unit = e.value("unit", std::string{});
    s.bound_lo = bound_from_json(e.value("bound_lo", nlohmann::json()), -kInf);
    s.bound_hi = bound_from_json(e.value("bound_hi", nlohmann::json()), kInf);
    specs.push_back(std::move(s));
  }
  validate_feature_specs(specs);
  return specs;
}

nlohmann::json feature_specs_to_json(const std::vector<FeatureSpec>& specs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : specs) {
    j.push_back({{"name", s.name},
                 {"unit", s.unit},
                 {"bound_lo", bound_to_json(s.bound_lo)},
                 {"bound_hi", bound_to_json(s.bound_hi)}});
  }
  return j;
}

std::vector<FeatureSpec> load_feature_specs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open schema " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return feature_specs_from_json(j);
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n_samples = j.value("n_samples", s.n_samples);
  s.n_features = j.value("n_features", s.n_features);
  s.class_ratio = j.value("class_ratio", s.class_ratio);
  s.separation = j.value("separation", s.separation);
  s.missing_rate = j.value("missing_rate", s.missing_rate);
  s.seed = j.value("seed", s.seed);
  std::string shape = j.value("cluster_shape", std::string("spherical"));
  if (shape == "spherical") {
    s.cluster_shape = ClusterShape::Spherical;
  } else if (shape == "diagonal") {
    s.cluster_shape = ClusterShape::Diagonal;
  } else if (shape == "correlated") {
    s.cluster_shape = ClusterShape::Correlated;
  } else {
    throw Error(ErrorKind::InvalidConfig, "cluster_shape: unknown value '" + shape + "'");
  }
  if (s.n_features < 2) throw Error(ErrorKind::InvalidConfig, "n_features: must be >= 2");
  if (s.n_samples < 2) throw Error(ErrorKind::InvalidConfig, "n_samples: must be >= 2");
  if (!(s.class_ratio > 0.0 && s.class_ratio <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "class_ratio: must lie in (0, 1]");
  if (!(s.separation >= 0.0)) throw Error(ErrorKind::InvalidConfig, "separation: must be >= 0");
  if (!(s.missing_rate >= 0.0 && s.missing_rate < 1.0))
    throw Error(ErrorKind::InvalidConfig, "missing_rate: must lie in [0, 1)");
  return s;
}

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& s) {
  return {{"n_samples", s.n_samples},       {"n_features", s.n_features},
          {"class_ratio", s.class_ratio},   {"separation", s.separation},
          {"cluster_shape", shape_name(s.cluster_shape)},
          {"missing_rate", s.missing_rate}, {"seed", s.seed}};
}

Dataset parse_csv(const std::string& text, const std::vector<FeatureSpec>& specs,
                  const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw Error(ErrorKind::EmptyFile, "no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index.emplace(header[c], c);

  auto column_of = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw Error(ErrorKind::MissingColumn, name);
    return it->second;
  };
  std::vector<std::size_t> feature_cols;
  for (const auto& s : specs) feature_cols.push_back(column_of(s.name));
  std::optional<std::size_t> label_col;
  if (options.label_column) label_col = column_of(*options.label_column);
  std::vector<std::size_t> side_cols;
  for (const auto& name : options.side_columns) side_cols.push_back(column_of(name));

  auto is_missing = [&](const std::string& cell) {
    return std::find(options.missing_tokens.begin(), options.missing_tokens.end(), cell) !=
           options.missing_tokens.end();
  };

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::vector<std::vector<double>> side_values(side_cols.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    cells.resize(std::max(cells.size(), header.size()));
    std::vector<double> values(specs.size());
    for (std::size_t f = 0; f < specs.size(); ++f) {
      const auto& cell = cells[feature_cols[f]];
      if (is_missing(cell)) {
        values[f] = kNaN;
        continue;
      }
      auto v = parse_double(cell);
      if (!v || !std::isfinite(*v))
        throw Error(ErrorKind::NonNumericCell,
                    "row " + std::to_string(row) + ", column " + specs[f].name + ": '" + cell + "'");
      values[f] = *v;
    }
    for (std::size_t s = 0; s < side_cols.size(); ++s) {
      const auto& cell = cells[side_cols[s]];
      if (is_missing(cell)) {
        side_values[s].push_back(kNaN);
        continue;
      }
      auto v = parse_double(cell);
      if (!v)
        throw Error(ErrorKind::NonNumericCell, "row " + std::to_string(row) + ", column " +
                                                   options.side_columns[s] + ": '" + cell + "'");
      side_values[s].push_back(*v);
    }
    if (label_col) {
      const auto& cell = cells[*label_col];
      if (is_missing(cell))
        throw Error(ErrorKind::NonNumericCell,
                    "row " + std::to_string(row) + ", column " + *options.label_column + ": missing label");
      raw_labels.push_back(cell);
    }
    rows.push_back(std::move(values));
    ++row;
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyFile, "no data rows");

  Dataset ds;
  ds.feature_specs = specs;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(specs.size());
  ds.X.resize(n, d);
  ds.missing.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      ds.X(i, j) = v;
      ds.missing(i, j) = std::isnan(v);
    }
  for (std::size_t s = 0; s < side_cols.size(); ++s)
    ds.side_columns.emplace(options.side_columns[s], std::move(side_values[s]));

  if (label_col) {
    // Class names sort numerically when every label parses as a number.
    std::vector<std::string> names(raw_labels.begin(), raw_labels.end());
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    bool numeric = std::all_of(names.begin(), names.end(),
                               [](const std::string& s) { return parse_double(s).has_value(); });
    if (numeric)
      std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
        return *parse_double(a) < *parse_double(b);
      });
    std::unordered_map<std::string, int> code;
    for (std::size_t c = 0; c < names.size(); ++c) code.emplace(names[c], static_cast<int>(c));
    Labels labels(raw_labels.size());
    for (std::size_t i = 0; i < raw_labels.size(); ++i) labels[i] = code.at(raw_labels[i]);
    ds.labels = std::move(labels);
    ds.class_names = std::move(names);
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<FeatureSpec>& specs,
                 const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), specs, options);
}

void write_csv(const std::filesystem::path& path, const Dataset& ds,
               const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.precision(17);
  for (std::size_t j = 0; j < ds.feature_specs.size(); ++j) {
    if (j) out << ',';
    out << ds.feature_specs[j].name;
  }
  for (const auto& [name, col] : ds.side_columns) out << ',' << name;
  if (ds.labels) out << ',' << label_column;
  out << '\n';
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
      if (j) out << ',';
      if (!ds.missing(i, j)) out << ds.X(i, j);
    }
    for (const auto& [name, col] : ds.side_columns) {
      out << ',';
      if (!std::isnan(col[static_cast<std::size_t>(i)])) out << col[static_cast<std::size_t>(i)];
    }
    if (ds.labels) {
      const int l = (*ds.labels)[static_cast<std::size_t>(i)];
      out << ',';
      if (static_cast<std::size_t>(l) < ds.class_names.size())
        out << ds.class_names[static_cast<std::size_t>(l)];
      else
        out << l;
    }
    out << '\n';
  }
}

Dataset apply_bounds(const Dataset& ds) {
  Dataset out = ds;
  for (Eigen::Index j = 0; j < out.X.cols(); ++j) {
    const auto& spec = out.feature_specs[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
      if (out.missing(i, j)) continue;
      const double v = out.X(i, j);
      if (v < spec.bound_lo || v > spec.bound_hi) {
        out.X(i, j) = kNaN;
        out.missing(i, j) = true;
      }
    }
  }
  return out;
}

Dataset filter_missing_rate(const Dataset& ds, double max_rate) {
  if (!(max_rate >= 0.0 && max_rate <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "max_rate must lie in [0, 1]");
  std::vector<Eigen::Index> keep;
  const double d = static_cast<double>(ds.n_features());
  for (Eigen::Index i = 0; i < ds.n_samples(); ++i) {
    const double rate = static_cast<double>(ds.missing.row(i).count()) / d;
    if (!(rate > max_rate)) keep.push_back(i);
  }
  if (keep.empty())
    throw Error(ErrorKind::AllSamplesRemoved,
                "every sample exceeds missing rate " + std::to_string(max_rate));
  return ds.select_rows(keep);
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::DegenerateInput, "median of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Dataset impute_median(const Dataset& ds) {
  Dataset out = ds;
  for (Eigen::Index j = 0; j < out.X.cols(); ++j) {
    std::vector<double> observed;
    observed.reserve(static_cast<std::size_t>(out.X.rows()));
    for (Eigen::Index i = 0; i < out.X.rows(); ++i)
      if (!out.missing(i, j)) observed.push_back(out.X(i, j));
    if (observed.empty())
      throw Error(ErrorKind::AllMissingFeature, out.feature_specs[static_cast<std::size_t>(j)].name);
    if (observed.size() == static_cast<std::size_t>(out.X.rows())) continue;
    const double m = median(std::move(observed));
    for (Eigen::Index i = 0; i < out.X.rows(); ++i)
      if (out.missing(i, j)) out.X(i, j) = m;
  }
  out.missing.setConstant(false);
  return out;
}

std::pair<Dataset, ScalerParams> standardize(const Dataset& ds) {
  if (ds.missing.any())
    throw Error(ErrorKind::DegenerateInput, "standardize requires imputed data");
  ScalerParams params;
  const auto n = static_cast<double>(ds.n_samples());
  params.means = ds.X.colwise().mean().transpose();
  params.stds.resize(ds.n_features());
  for (Eigen::Index j = 0; j < ds.n_features(); ++j) {
    const double var = (ds.X.col(j).array() - params.means(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    params.stds(j) = sd > 1e-12 * std::max(1.0, std::abs(params.means(j))) ? sd : 1.0;
  }
  Dataset out = ds;
  out.X = params.apply(ds.X);
  return {std::move(out), std::move(params)};
}

Dataset stratified_subsample(const Dataset& ds, std::size_t n, double class_ratio,
                             std::uint64_t seed) {
  if (!ds.labels) throw Error(ErrorKind::DegenerateInput, "stratified_subsample requires labels");
  if (ds.n_classes() != 2)
    throw Error(ErrorKind::DegenerateInput, "stratified_subsample supports two classes");
  if (!(class_ratio > 0.0 && class_ratio <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "class_ratio must lie in (0, 1]");

  std::array<std::vector<Eigen::Index>, 2> members;
  for (std::size_t i = 0; i < ds.labels->size(); ++i)
    members[static_cast<std::size_t>((*ds.labels)[i])].push_back(static_cast<Eigen::Index>(i));
  // The minority class is whichever is rarer in the input; ties go to class 1.
  const int minority = members[0].size() < members[1].size() ? 0 : 1;
  const int majority = 1 - minority;
  const auto n_minor = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * class_ratio / (1.0 + class_ratio)));
  const std::size_t n_major = n - n_minor;

  auto check = [&](int cls, std::size_t needed) {
    const std::size_t available = members[static_cast<std::size_t>(cls)].size();
    if (needed > available)
      throw Error(ErrorKind::InsufficientClassSamples,
                  "class " + std::to_string(cls) + " needs " + std::to_string(needed) +
                      ", has " + std::to_string(available));
  };
  check(minority, n_minor);
  check(majority, n_major);

  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> chosen;
  for (auto [cls, count] : {std::pair{minority, n_minor}, std::pair{majority, n_major}}) {
    auto pool = members[static_cast<std::size_t>(cls)];
    std::shuffle(pool.begin(), pool.end(), rng);
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  }
  std::sort(chosen.begin(), chosen.end());
  return ds.select_rows(chosen);
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_features < 2) throw Error(ErrorKind::InvalidDimension, "n_features must be >= 2");
  if (!(spec.class_ratio > 0.0 && spec.class_ratio <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "class_ratio must lie in (0, 1]");
  if (!(spec.separation >= 0.0)) throw Error(ErrorKind::InvalidConfig, "separation must be >= 0");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.n_features);
  const auto n = static_cast<Eigen::Index>(spec.n_samples);

  // Per-class covariance factors L (cov = L L^T).
  std::array<Matrix, 2> factor;
  for (auto& L : factor) {
    switch (spec.cluster_shape) {
      case ClusterShape::Spherical:
        L = Matrix::Identity(d, d);
        break;
      case ClusterShape::Diagonal: {
        L = Matrix::Zero(d, d);
        for (Eigen::Index j = 0; j < d; ++j) L(j, j) = 0.5 + 1.5 * uniform(rng);
        break;
      }
      case ClusterShape::Correlated: {
        Matrix A(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
          for (Eigen::Index c = 0; c < d; ++c) A(r, c) = normal(rng);
        Matrix cov = A * A.transpose() / static_cast<double>(d) + 0.1 * Matrix::Identity(d, d);
        cov *= static_cast<double>(d) / cov.trace();
        L = Eigen::LLT<Matrix>(cov).matrixL();
        break;
      }
    }
  }
  double mean_sd = 0.0;
  for (const auto& L : factor)
    mean_sd += std::sqrt((L * L.transpose()).trace() / static_cast<double>(d));
  mean_sd /= 2.0;

  Vector direction(d);
  for (Eigen::Index j = 0; j < d; ++j) direction(j) = normal(rng);
  direction.normalize();
  const Vector offset = 0.5 * spec.separation * mean_sd * direction;
  const std::array<Vector, 2> means{-offset, offset};

  const auto n_minor = static_cast<std::size_t>(std::llround(
      static_cast<double>(spec.n_samples) * spec.class_ratio / (1.0 + spec.class_ratio)));
  Labels labels(spec.n_samples, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_minor), 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset ds;
  ds.X.resize(n, d);
  Vector eps(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) eps(j) = normal(rng);
    const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    ds.X.row(i) = (means[c] + factor[c] * eps).transpose();
  }
  ds.missing = MissingMask::Constant(n, d, false);
  if (spec.missing_rate > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        if (uniform(rng) < spec.missing_rate) {
          ds.missing(i, j) = true;
          ds.X(i, j) = kNaN;
        }
  }
  for (Eigen::Index j = 0; j < d; ++j)
    ds.feature_specs.push_back(FeatureSpec{"x" + std::to_string(j), "", -kInf, kInf});
  ds.labels = std::move(labels);
  ds.class_names = {"0", "1"};
  return ds;
}

}  // namespace tabclust
