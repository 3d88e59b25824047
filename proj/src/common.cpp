#include "tabclust/common.hpp"

namespace tabclust {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonNumericCell: return "NonNumericCell";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::AllSamplesRemoved: return "AllSamplesRemoved";
    case ErrorKind::AllMissingFeature: return "AllMissingFeature";
    case ErrorKind::InsufficientClassSamples: return "InsufficientClassSamples";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::UnsupportedK: return "UnsupportedK";
    case ErrorKind::EmptyRuns: return "EmptyRuns";
    case ErrorKind::IncompleteGrid: return "IncompleteGrid";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Labels argmax_rows(const Matrix& m) {
  Labels out(static_cast<std::size_t>(m.rows()), 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) > m(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace tabclust
