#include "tabclust/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "tabclust/data.hpp"
#include "tabclust/metrics.hpp"

namespace tabclust {

namespace {

void check_binary(const LabelMatrix& m) {
  if (m.runs.empty()) throw Error(ErrorKind::EmptyRuns, "no label vectors supplied");
  const std::size_t n = m.runs.front().size();
  for (const auto& run : m.runs) {
    if (run.size() != n) throw Error(ErrorKind::LengthMismatch, "label vectors differ in length");
    for (int l : run)
      if (l < 0 || l > 1) throw Error(ErrorKind::UnsupportedK, "binary labels required, found " + std::to_string(l));
  }
}

std::vector<int> aligned_ones(const LabelMatrix& m) {
  check_binary(m);
  std::vector<int> ones(m.n_samples(), 0);
  for (const auto& run : m.runs) {
    const Labels aligned = align_labels(m.runs.front(), run, 2);
    for (std::size_t i = 0; i < aligned.size(); ++i) ones[i] += aligned[i];
  }
  return ones;
}

}  // namespace

Labels align_labels(const Labels& reference, const Labels& candidate, int k) {
  if (reference.size() != candidate.size())
    throw Error(ErrorKind::LengthMismatch,
                std::to_string(reference.size()) + " vs " + std::to_string(candidate.size()) + " labels");
  if (reference.empty()) return candidate;
  int observed = std::max(*std::max_element(reference.begin(), reference.end()),
                          *std::max_element(candidate.begin(), candidate.end())) + 1;
  if (k < observed) k = observed;
  // weight(candidate label, reference label)
  Matrix w = Matrix::Zero(k, k);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (reference[i] < 0 || candidate[i] < 0) throw Error(ErrorKind::DegenerateInput, "negative label");
    w(candidate[i], reference[i]) += 1.0;
  }
  const auto perm = hungarian_max(w);
  Labels out(candidate.size());
  for (std::size_t i = 0; i < candidate.size(); ++i) out[i] = perm[static_cast<std::size_t>(candidate[i])];
  return out;
}

Labels dimension_ensemble(const LabelMatrix& runs) {
  const auto ones = aligned_ones(runs);
  const double count = static_cast<double>(runs.runs.size());
  Labels out(ones.size());
  for (std::size_t i = 0; i < ones.size(); ++i) out[i] = static_cast<double>(ones[i]) / count >= 0.5 ? 1 : 0;
  return out;
}

Labels majority_vote(const LabelMatrix& voters) {
  const auto ones = aligned_ones(voters);
  const int count = static_cast<int>(voters.runs.size());
  Labels out(ones.size());
  for (std::size_t i = 0; i < ones.size(); ++i) out[i] = 2 * ones[i] >= count ? 1 : 0;
  return out;
}

std::vector<int> sweep_dims(int max_dim, int start, int step) {
  if (start < 1 || step < 1) throw Error(ErrorKind::InvalidConfig, "sweep start and step must be >= 1");
  std::vector<int> dims;
  for (int d = start; d <= max_dim; d += step) dims.push_back(d);
  return dims;
}

SweepResult run_dimension_sweep(const Matrix& X, int k, const std::vector<int>& dims,
                                const DeepClusterConfig& base_config, unsigned threads) {
  if (dims.empty()) throw Error(ErrorKind::EmptyRuns, "no embedding sizes requested");
  for (int d : dims)
    if (d < 1 || d > X.cols())
      throw Error(ErrorKind::InvalidConfig, "embedding size " + std::to_string(d) + " outside [1, " +
                                                std::to_string(X.cols()) + "]");

  std::vector<SweepRun> runs(dims.size());
  std::vector<std::exception_ptr> errors(dims.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dims.size(); i = next++) {
      const auto start = std::chrono::steady_clock::now();
      try {
        DeepClusterConfig config = base_config;
        config.variant = Variant::Gaussian;
        config.embed_dim = dims[i];
        config.train.seed = derive_seed(base_config.train.seed, static_cast<std::uint64_t>(dims[i]));
        runs[i].embed_dim = dims[i];
        runs[i].seed = config.train.seed;
        runs[i].labels = train_deep_cluster(X, k, config).labels;
      } catch (...) {
        errors[i] = std::current_exception();
      }
      runs[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(dims.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (!errors[i]) continue;
    const std::string tag = "embed_dim " + std::to_string(dims[i]) + ": ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), tag + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(tag + e.what());
    }
  }

  SweepResult result;
  for (const auto& r : runs) {
    result.labels.runs.push_back(r.labels);
    result.labels.names.push_back("d" + std::to_string(r.embed_dim));
  }
  result.runs = std::move(runs);
  return result;
}

SweepResult run_dimension_sweep(const Dataset& ds, const std::vector<int>& dims,
                                const DeepClusterConfig& base_config, unsigned threads) {
  if (ds.missing.any()) throw Error(ErrorKind::DegenerateInput, "sweep requires imputed data");
  return run_dimension_sweep(ds.X, 2, dims, base_config, threads);
}

void write_label_matrix(const std::filesystem::path& path, const LabelMatrix& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (std::size_t r = 0; r < m.runs.size(); ++r) {
    if (r) out << ',';
    out << (r < m.names.size() ? m.names[r] : "run" + std::to_string(r));
  }
  out << '\n';
  for (std::size_t i = 0; i < m.n_samples(); ++i) {
    for (std::size_t r = 0; r < m.runs.size(); ++r) {
      if (r) out << ',';
      out << m.runs[r][i];
    }
    out << '\n';
  }
}

LabelMatrix read_label_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  LabelMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyFile, path.string());
  std::stringstream header(line);
  for (std::string cell; std::getline(header, cell, ',');) m.names.push_back(cell);
  m.runs.resize(m.names.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::size_t col = 0;
    for (std::string cell; std::getline(ss, cell, ','); ++col) {
      if (col >= m.runs.size()) throw Error(ErrorKind::LengthMismatch, "row " + std::to_string(row));
      try {
        m.runs[col].push_back(std::stoi(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::NonNumericCell, "row " + std::to_string(row) + ", column " + m.names[col]);
      }
    }
    if (col != m.runs.size()) throw Error(ErrorKind::LengthMismatch, "row " + std::to_string(row));
    ++row;
  }
  return m;
}

}  // namespace tabclust
