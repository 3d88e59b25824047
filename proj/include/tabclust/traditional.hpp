#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabclust/common.hpp"

namespace tabclust {

struct KMeansOptions {
  int n_init = 10;
  int max_iter = 300;
  double tol = 1e-4;  // largest Euclidean centroid shift at convergence
};

struct KMeansModel {
  Matrix centroids;  // K x d
  double inertia = 0.0;
  int n_iter = 0;
  Labels labels;                        // fit-time assignment
  std::vector<double> inertia_history;  // per Lloyd iteration of the winning restart
};

// Lloyd's algorithm with k-means++ seeding; best restart by inertia. Restart r
// draws from a stream seeded by derive_seed(seed, r).
KMeansModel kmeans_fit(const Matrix& X, int k, std::uint64_t seed, const KMeansOptions& options = {});
Labels kmeans_predict(const KMeansModel& model, const Matrix& X);

enum class CovarianceType { Diagonal, Full };

struct GmmOptions {
  CovarianceType cov_type = CovarianceType::Full;
  int max_iter = 300;
  double tol = 1e-3;  // mean log-likelihood gain
  double reg_covar = 1e-6;
};

struct GmmModel {
  CovarianceType cov_type = CovarianceType::Full;
  Vector weights;                    // K
  Matrix means;                      // K x d
  std::vector<Matrix> covariances;   // K of d x d (diagonal type keeps off-diagonals at 0)
  std::vector<double> log_likelihood_history;  // mean per-sample log-likelihood per E-step
  bool converged = false;

  int n_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
};

struct GmmPrediction {
  Labels labels;
  Matrix responsibilities;  // n x K
  double mean_log_likelihood = 0.0;
};

GmmModel gmm_fit(const Matrix& X, int k, std::uint64_t seed, const GmmOptions& options = {});
GmmPrediction gmm_predict(const GmmModel& model, const Matrix& X);

// Component log-densities log(pi_j N(x_i; mu_j, Sigma_j)), n x K.
Matrix gmm_weighted_log_density(const GmmModel& model, const Matrix& X);

// One M-step from responsibilities; reg_covar is added to every covariance diagonal.
GmmModel gmm_m_step(const Matrix& X, const Matrix& resp, CovarianceType cov_type, double reg_covar);

// Rows of log-weights normalised with log-sum-exp; returns per-row log normaliser.
Vector normalize_log_rows(Matrix& log_prob);

nlohmann::json to_json(const KMeansModel& model);
nlohmann::json to_json(const GmmModel& model);

}  // namespace tabclust
