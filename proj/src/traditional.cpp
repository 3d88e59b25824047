#include "tabclust/traditional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

namespace tabclust {

namespace {

void require_finite(const Matrix& X) {
  if (!X.allFinite()) throw Error(ErrorKind::DegenerateInput, "input contains non-finite values");
}

struct Assignment {
  Labels labels;
  Vector distances;  // squared distance to the assigned centroid
  double inertia = 0.0;
};

Assignment assign_nearest(const Matrix& X, const Matrix& centroids) {
  Assignment a;
  a.labels.resize(static_cast<std::size_t>(X.rows()));
  a.distances.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int best = 0;
    double best_d = (X.row(i) - centroids.row(0)).squaredNorm();
    for (Eigen::Index j = 1; j < centroids.rows(); ++j) {
      const double d = (X.row(i) - centroids.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    a.labels[static_cast<std::size_t>(i)] = best;
    a.distances(i) = best_d;
  }
  a.inertia = a.distances.sum();
  return a;
}

Matrix kmeans_plus_plus(const Matrix& X, int k, std::mt19937_64& rng) {
  const Eigen::Index n = X.rows();
  Matrix centers(k, X.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  centers.row(0) = X.row(pick(rng));
  Vector closest(n);
  for (Eigen::Index i = 0; i < n; ++i) closest(i) = (X.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = closest.sum();
    Eigen::Index chosen = n - 1;
    if (total > 0.0) {
      const double r = unit(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += closest(i);
        if (acc > r && closest(i) > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.row(c) = X.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i)
      closest(i) = std::min(closest(i), (X.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

KMeansModel lloyd(const Matrix& X, Matrix centroids, const KMeansOptions& options) {
  const Eigen::Index k = centroids.rows();
  KMeansModel model;
  Assignment current = assign_nearest(X, centroids);
  for (int it = 1; it <= options.max_iter; ++it) {
    model.inertia_history.push_back(current.inertia);
    Matrix updated = Matrix::Zero(k, X.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int l = current.labels[static_cast<std::size_t>(i)];
      updated.row(l) += X.row(i);
      ++counts[static_cast<std::size_t>(l)];
    }
    Vector far = current.distances;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) {
        updated.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
      } else {
        // Empty cluster: reseed at the point farthest from its own centroid.
        Eigen::Index idx = 0;
        far.maxCoeff(&idx);
        updated.row(j) = X.row(idx);
        far(idx) = -1.0;
      }
    }
    double shift = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      shift = std::max(shift, (updated.row(j) - centroids.row(j)).norm());
    centroids = std::move(updated);
    model.n_iter = it;
    current = assign_nearest(X, centroids);
    if (shift < options.tol) break;
  }
  model.inertia_history.push_back(current.inertia);
  model.centroids = std::move(centroids);
  model.labels = std::move(current.labels);
  model.inertia = current.inertia;
  return model;
}

}  // namespace

KMeansModel kmeans_fit(const Matrix& X, int k, std::uint64_t seed, const KMeansOptions& options) {
  if (k < 2) throw Error(ErrorKind::DegenerateInput, "k must be >= 2");
  if (X.rows() < k)
    throw Error(ErrorKind::DegenerateInput,
                std::to_string(X.rows()) + " samples for " + std::to_string(k) + " clusters");
  if (options.n_init < 1 || options.max_iter < 1)
    throw Error(ErrorKind::InvalidConfig, "n_init and max_iter must be positive");
  require_finite(X);

  KMeansModel best;
  bool have_best = false;
  for (int r = 0; r < options.n_init; ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    KMeansModel run = lloyd(X, kmeans_plus_plus(X, k, rng), options);
    if (!have_best || run.inertia < best.inertia) {
      best = std::move(run);
      have_best = true;
    }
  }
  return best;
}

Labels kmeans_predict(const KMeansModel& model, const Matrix& X) {
  if (X.cols() != model.centroids.cols())
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(model.centroids.cols()) +
                                                  " columns, got " + std::to_string(X.cols()));
  return assign_nearest(X, model.centroids).labels;
}

Vector normalize_log_rows(Matrix& log_prob) {
  Vector norm(log_prob.rows());
  for (Eigen::Index i = 0; i < log_prob.rows(); ++i) {
    const double m = log_prob.row(i).maxCoeff();
    const double lse = m + std::log((log_prob.row(i).array() - m).exp().sum());
    log_prob.row(i).array() -= lse;
    norm(i) = lse;
  }
  return norm;
}

Matrix gmm_weighted_log_density(const GmmModel& model, const Matrix& X) {
  if (X.cols() != model.means.cols())
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(model.means.cols()) +
                                                  " columns, got " + std::to_string(X.cols()));
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  Matrix out(n, model.n_components());
  for (int j = 0; j < model.n_components(); ++j) {
    const Matrix& cov = model.covariances[static_cast<std::size_t>(j)];
    const Matrix centered = X.rowwise() - model.means.row(j);
    Vector maha(n);
    double log_det = 0.0;
    if (model.cov_type == CovarianceType::Diagonal) {
      const Vector var = cov.diagonal();
      if ((var.array() <= 0.0).any())
        throw Error(ErrorKind::SingularCovariance, "component " + std::to_string(j));
      log_det = var.array().log().sum();
      maha = (centered.array().square().rowwise() / var.transpose().array()).rowwise().sum();
    } else {
      Eigen::LLT<Matrix> llt(cov);
      if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::SingularCovariance, "component " + std::to_string(j));
      const Matrix L = llt.matrixL();
      log_det = 2.0 * L.diagonal().array().log().sum();
      const Matrix solved = llt.matrixL().solve(centered.transpose());
      maha = solved.colwise().squaredNorm().transpose();
    }
    out.col(j) = (-0.5 * (static_cast<double>(d) * log_2pi + log_det) + std::log(model.weights(j))) -
                 0.5 * maha.array();
  }
  return out;
}

GmmModel gmm_m_step(const Matrix& X, const Matrix& resp, CovarianceType cov_type, double reg_covar) {
  const Eigen::Index k = resp.cols();
  GmmModel model;
  model.cov_type = cov_type;
  const Vector nk = resp.colwise().sum().transpose().array() +
                    10.0 * std::numeric_limits<double>::epsilon();
  model.weights = nk / nk.sum();
  model.means = (resp.transpose() * X).array().colwise() / nk.array();
  model.covariances.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const Matrix centered = X.rowwise() - model.means.row(j);
    Matrix cov;
    if (cov_type == CovarianceType::Full) {
      cov = (centered.array().colwise() * resp.col(j).array()).matrix().transpose() * centered / nk(j);
      cov = 0.5 * (cov + cov.transpose());
    } else {
      const Vector var =
          (centered.array().square().colwise() * resp.col(j).array()).colwise().sum().transpose() / nk(j);
      cov = var.asDiagonal();
    }
    cov.diagonal().array() += reg_covar;
    model.covariances[static_cast<std::size_t>(j)] = std::move(cov);
  }
  return model;
}

GmmModel gmm_fit(const Matrix& X, int k, std::uint64_t seed, const GmmOptions& options) {
  if (k < 2) throw Error(ErrorKind::DegenerateInput, "k must be >= 2");
  if (X.rows() <= k)
    throw Error(ErrorKind::DegenerateInput,
                std::to_string(X.rows()) + " samples for " + std::to_string(k) + " components");
  if (!(options.reg_covar > 0.0)) throw Error(ErrorKind::InvalidConfig, "reg_covar must be > 0");
  if (options.max_iter < 1) throw Error(ErrorKind::InvalidConfig, "max_iter must be positive");
  require_finite(X);

  KMeansOptions init_options;
  init_options.n_init = 1;
  const KMeansModel init = kmeans_fit(X, k, seed, init_options);
  Matrix resp = Matrix::Zero(X.rows(), k);
  for (Eigen::Index i = 0; i < X.rows(); ++i) resp(i, init.labels[static_cast<std::size_t>(i)]) = 1.0;

  GmmModel model = gmm_m_step(X, resp, options.cov_type, options.reg_covar);
  std::vector<double> history;
  for (int it = 0; it < options.max_iter; ++it) {
    Matrix log_resp = gmm_weighted_log_density(model, X);
    const double mean_ll = normalize_log_rows(log_resp).mean();
    const bool converged = !history.empty() && std::abs(mean_ll - history.back()) < options.tol;
    history.push_back(mean_ll);
    if (converged) {
      model.converged = true;
      break;
    }
    if (it + 1 == options.max_iter) break;
    model = gmm_m_step(X, log_resp.array().exp().matrix(), options.cov_type, options.reg_covar);
  }
  model.log_likelihood_history = std::move(history);
  return model;
}

GmmPrediction gmm_predict(const GmmModel& model, const Matrix& X) {
  Matrix log_resp = gmm_weighted_log_density(model, X);
  GmmPrediction p;
  p.mean_log_likelihood = normalize_log_rows(log_resp).mean();
  p.responsibilities = log_resp.array().exp();
  p.labels = argmax_rows(p.responsibilities);
  return p;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const KMeansModel& model) {
  return {{"type", "kmeans"},
          {"centroids", matrix_json(model.centroids)},
          {"inertia", model.inertia},
          {"n_iter", model.n_iter}};
}

nlohmann::json to_json(const GmmModel& model) {
  nlohmann::json covs = nlohmann::json::array();
  for (const auto& c : model.covariances) covs.push_back(matrix_json(c));
  return {{"type", "gmm"},
          {"covariance_type", model.cov_type == CovarianceType::Full ? "full" : "diagonal"},
          {"weights", std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size())},
          {"means", matrix_json(model.means)},
          {"covariances", covs},
          {"log_likelihood_history", model.log_likelihood_history},
          {"converged", model.converged}};
}

}  // namespace tabclust
