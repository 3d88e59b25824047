#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tabclust/common.hpp"
#include "tabclust/deepcluster.hpp"

namespace tabclust {

struct Dataset;

// Independent clusterings of the same samples, one label vector per run.
struct LabelMatrix {
  std::vector<Labels> runs;
  std::vector<std::string> names;  // optional column headers (dimension or voter name)

  std::size_t n_samples() const { return runs.empty() ? 0 : runs.front().size(); }
};

// Relabels `candidate` by the permutation that maximises agreement with
// `reference` (Hungarian on the contingency table; identity wins ties).
Labels align_labels(const Labels& reference, const Labels& candidate, int k = 0);

// Aligns every run to runs[0], averages the binary labels per sample and
// thresholds at >= 0.5.
Labels dimension_ensemble(const LabelMatrix& runs);

// Aligns every voter to voters[0] and takes the per-sample majority; exact
// ties resolve to 1.
Labels majority_vote(const LabelMatrix& voters);

// Embedding sizes start, start + step, ... up to and including `max_dim`.
std::vector<int> sweep_dims(int max_dim, int start = 2, int step = 3);

struct SweepRun {
  int embed_dim = 0;
  std::uint64_t seed = 0;
  Labels labels;
  double seconds = 0.0;
};

struct SweepResult {
  LabelMatrix labels;
  std::vector<SweepRun> runs;
};

// Pretrains and fine-tunes one Gaussian-variant model per embedding size with
// seed derive_seed(base seed, d). Runs execute on up to `threads` workers; the
// result does not depend on scheduling.
SweepResult run_dimension_sweep(const Matrix& X, int k, const std::vector<int>& dims,
                                const DeepClusterConfig& base_config, unsigned threads = 1);
SweepResult run_dimension_sweep(const Dataset& ds, const std::vector<int>& dims,
                                const DeepClusterConfig& base_config, unsigned threads = 1);

void write_label_matrix(const std::filesystem::path& path, const LabelMatrix& m);
LabelMatrix read_label_matrix(const std::filesystem::path& path);

}  // namespace tabclust
