#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tabclust {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Labels = std::vector<int>;

enum class ErrorKind {
  MissingColumn,
  NonNumericCell,
  EmptyFile,
  AllSamplesRemoved,
  AllMissingFeature,
  InsufficientClassSamples,
  DegenerateInput,
  SingularCovariance,
  DimensionMismatch,
  InvalidDimension,
  StaleCache,
  NonFiniteLoss,
  LengthMismatch,
  NonSquare,
  TooFewSamples,
  UnsupportedK,
  EmptyRuns,
  IncompleteGrid,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and tests)
// can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// SplitMix64 finaliser; combines a base seed with a stream index so that
// derived streams are independent of scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Row-wise argmax, ties resolved to the lowest column index.
Labels argmax_rows(const Matrix& m);

}  // namespace tabclust
