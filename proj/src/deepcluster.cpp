#include "tabclust/deepcluster.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>

namespace tabclust {

namespace {

void check_dims(const Matrix& Z, const ClusterParams& params) {
  if (Z.cols() != params.mu.cols())
    throw Error(ErrorKind::DimensionMismatch, "embedding width " + std::to_string(Z.cols()) +
                                                  " vs centre width " + std::to_string(params.mu.cols()));
}

void check_gaussian(const ClusterParams& params) {
  if (static_cast<int>(params.sigma.size()) != params.k() || params.pi.size() != params.k())
    throw Error(ErrorKind::DimensionMismatch, "Gaussian soft assignment needs sigma and pi per cluster");
}

// Refresh the Gaussian parameters with one EM step on the current embedding.
ClusterParams em_refresh(const Matrix& Z, const ClusterParams& params, double reg_covar) {
  const Matrix resp = soft_assign_gaussian(Z, params);
  return from_gmm(gmm_m_step(Z, resp, CovarianceType::Full, reg_covar));
}

// Reseed every centre whose soft mass fell below one sample at the point with
// the least confident assignment.
void handle_collapse(const Matrix& Z, ClusterParams& params, Variant variant, double reg_covar, int epoch,
                     std::vector<CollapseEvent>& events) {
  for (int attempt = 0; attempt < params.k(); ++attempt) {
    const Matrix S = soft_assign(Z, params, variant);
    const Vector mass = S.colwise().sum().transpose();
    Eigen::Index j = 0;
    if (mass.minCoeff(&j) >= 1.0) return;
    events.push_back(CollapseEvent{epoch, static_cast<int>(j), mass(j)});
    Eigen::Index worst = 0;
    S.rowwise().maxCoeff().minCoeff(&worst);
    params.mu.row(j) = Z.row(worst);
    if (variant == Variant::Gaussian) {
      const Matrix centered = Z.rowwise() - Z.colwise().mean();
      Matrix cov = centered.transpose() * centered / static_cast<double>(Z.rows());
      cov.diagonal().array() += reg_covar;
      params.sigma[static_cast<std::size_t>(j)] = cov;
      params.pi(j) = 1.0 / params.k();
      params.pi /= params.pi.sum();
    }
  }
}

}  // namespace

const char* to_string(Variant v) { return v == Variant::StudentT ? "student_t" : "gaussian"; }

Variant variant_from_string(const std::string& s) {
  if (s == "student_t") return Variant::StudentT;
  if (s == "gaussian") return Variant::Gaussian;
  throw Error(ErrorKind::InvalidConfig, "variant: unknown value '" + s + "'");
}

void DeepClusterConfig::validate() const {
  train.validate();
  if (!(gamma >= 0.0)) throw Error(ErrorKind::InvalidConfig, "gamma must be >= 0");
  if (embed_dim < 1) throw Error(ErrorKind::InvalidConfig, "embed_dim must be >= 1");
  if (finetune_epochs < 0) throw Error(ErrorKind::InvalidConfig, "finetune_epochs must be >= 0");
  if (target_update_interval < 1) throw Error(ErrorKind::InvalidConfig, "target_update_interval must be >= 1");
  if (!(reg_covar > 0.0)) throw Error(ErrorKind::InvalidConfig, "reg_covar must be > 0");
}

GmmModel as_gmm(const ClusterParams& params) {
  check_gaussian(params);
  GmmModel g;
  g.cov_type = CovarianceType::Full;
  g.weights = params.pi;
  g.means = params.mu;
  g.covariances = params.sigma;
  return g;
}

ClusterParams from_gmm(const GmmModel& gmm) {
  ClusterParams p;
  p.mu = gmm.means;
  p.pi = gmm.weights;
  p.sigma = gmm.covariances;
  if (gmm.cov_type == CovarianceType::Diagonal)
    for (auto& s : p.sigma) s = Matrix(s.diagonal().asDiagonal());
  return p;
}

ClusterParams init_clusters(const Matrix& Z, int k, Variant variant, std::uint64_t seed, double reg_covar,
                            int kmeans_n_init) {
  if (variant == Variant::StudentT) {
    KMeansOptions options;
    options.n_init = kmeans_n_init;
    ClusterParams p;
    p.mu = kmeans_fit(Z, k, seed, options).centroids;
    return p;
  }
  GmmOptions options;
  options.cov_type = CovarianceType::Full;
  options.reg_covar = reg_covar;
  return from_gmm(gmm_fit(Z, k, seed, options));
}

Matrix soft_assign_student_t(const Matrix& Z, const ClusterParams& params) {
  check_dims(Z, params);
  Matrix S(Z.rows(), params.k());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    for (int j = 0; j < params.k(); ++j) S(i, j) = 1.0 / (1.0 + (Z.row(i) - params.mu.row(j)).squaredNorm());
    S.row(i) /= S.row(i).sum();
  }
  return S;
}

Matrix soft_assign_gaussian(const Matrix& Z, const ClusterParams& params) {
  check_dims(Z, params);
  check_gaussian(params);
  Matrix log_s = gmm_weighted_log_density(as_gmm(params), Z);
  normalize_log_rows(log_s);
  // Keep entries strictly positive so the KL term stays finite.
  return log_s.array().exp().max(std::numeric_limits<double>::min());
}

Matrix soft_assign(const Matrix& Z, const ClusterParams& params, Variant variant) {
  return variant == Variant::StudentT ? soft_assign_student_t(Z, params) : soft_assign_gaussian(Z, params);
}

Matrix target_distribution(const Matrix& S) {
  const RowVector freq = S.colwise().sum();
  Matrix T = S.array().square().rowwise() / freq.array();
  T.array().colwise() /= T.rowwise().sum().array();
  return T;
}

double kl_loss(const Matrix& T, const Matrix& S) {
  if (T.rows() != S.rows() || T.cols() != S.cols())
    throw Error(ErrorKind::DimensionMismatch, "target and soft assignment shapes differ");
  double total = 0.0;
  for (Eigen::Index i = 0; i < T.rows(); ++i)
    for (Eigen::Index j = 0; j < T.cols(); ++j)
      if (T(i, j) > 0.0) total += T(i, j) * std::log(T(i, j) / S(i, j));
  return total;
}

double joint_loss(const Matrix& X, const Matrix& Xhat, const Matrix& T, const Matrix& S, double gamma) {
  const double recon = reconstruction_loss(X, Xhat);
  if (gamma == 0.0) return recon;
  return recon + gamma * kl_loss(T, S) / static_cast<double>(S.rows());
}

ClusteringGradient clustering_loss_gradient(const Matrix& Z, const Matrix& T, const ClusterParams& params,
                                            Variant variant) {
  ClusteringGradient g;
  g.S = soft_assign(Z, params, variant);
  if (T.rows() != Z.rows() || T.cols() != params.k())
    throw Error(ErrorKind::DimensionMismatch, "target shape differs from the soft assignment");
  const double inv_m = 1.0 / static_cast<double>(Z.rows());
  g.kl = kl_loss(T, g.S) * inv_m;
  g.dZ = Matrix::Zero(Z.rows(), Z.cols());
  g.dMu = Matrix::Zero(params.k(), Z.cols());
  const Matrix diff = T - g.S;

  if (variant == Variant::StudentT) {
    for (Eigen::Index i = 0; i < Z.rows(); ++i)
      for (int j = 0; j < params.k(); ++j) {
        const RowVector delta = Z.row(i) - params.mu.row(j);
        const RowVector term = (2.0 * inv_m * diff(i, j) / (1.0 + delta.squaredNorm())) * delta;
        g.dZ.row(i) += term;
        g.dMu.row(j) -= term;
      }
    return g;
  }

  for (int j = 0; j < params.k(); ++j) {
    Eigen::LLT<Matrix> llt(params.sigma[static_cast<std::size_t>(j)]);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::SingularCovariance, "cluster " + std::to_string(j));
    const Matrix centered = Z.rowwise() - params.mu.row(j);
    // Rows of `precision_delta` are Sigma_j^-1 (z_i - mu_j).
    const Matrix precision_delta = llt.solve(centered.transpose()).transpose();
    const Matrix term = (precision_delta.array().colwise() * (inv_m * diff.col(j)).array()).matrix();
    g.dZ += term;
    g.dMu.row(j) -= term.colwise().sum();
  }
  return g;
}

DeepClusterModel finetune(AutoencoderModel model, const Matrix& X, int k, const DeepClusterConfig& config) {
  config.validate();
  if (X.cols() != model.input_dim())
    throw Error(ErrorKind::DimensionMismatch, "data width differs from the autoencoder input");
  if (!X.allFinite()) throw Error(ErrorKind::DegenerateInput, "fine-tuning data must be finite");

  DeepClusterModel out;
  out.variant = config.variant;
  const std::uint64_t seed = config.train.seed;
  ClusterParams params = init_clusters(encode(model, X), k, config.variant, seed, config.reg_covar,
                                       config.kmeans_n_init);

  if (config.gamma > 0.0 && config.finetune_epochs > 0) {
    reset_optimizer(model);
    Matrix mu_m = Matrix::Zero(params.mu.rows(), params.mu.cols());
    Matrix mu_v = mu_m;
    long mu_step = 0;

    std::mt19937_64 rng(derive_seed(seed, 0xF17E));
    Matrix T;
    for (int epoch = 0; epoch < config.finetune_epochs; ++epoch) {
      if (epoch % config.target_update_interval == 0) {
        const Matrix Z = encode(model, X);
        if (config.variant == Variant::Gaussian && epoch > 0) params = em_refresh(Z, params, config.reg_covar);
        handle_collapse(Z, params, config.variant, config.reg_covar, epoch, out.collapses);
        T = target_distribution(soft_assign(Z, params, config.variant));
      }
      for (const auto& idx : shuffled_batches(X.rows(), config.train.batch_size, rng)) {
        const Matrix batch = X(idx, Eigen::all);
        const Matrix T_batch = T(idx, Eigen::all);
        auto fwd = forward(model, batch);
        const auto cg = clustering_loss_gradient(fwd.Z, T_batch, params, config.variant);
        const Matrix dXhat = config.reconstruction ? reconstruction_loss_grad(batch, fwd.Xhat)
                                                   : Matrix::Zero(batch.rows(), batch.cols());
        const Matrix dZ = config.gamma * cg.dZ;
        adam_step(model, backward(model, fwd.cache, dXhat, dZ), config.train);
        if (config.variant == Variant::StudentT) {
          const Matrix dMu = config.gamma * cg.dMu;
          adam_update(params.mu, dMu, mu_m, mu_v, ++mu_step, config.train);
        }
      }
      const Matrix Z = encode(model, X);
      const double recon = reconstruction_loss(X, reconstruct(model, X));
      const double kl = kl_loss(T, soft_assign(Z, params, config.variant)) / static_cast<double>(X.rows());
      const double joint = (config.reconstruction ? recon : 0.0) + config.gamma * kl;
      if (!std::isfinite(joint) || !model.all_finite() || !params.mu.allFinite())
        throw Error(ErrorKind::NonFiniteLoss, "fine-tuning epoch " + std::to_string(epoch));
      out.recon_history.push_back(recon);
      out.kl_history.push_back(kl);
      out.joint_history.push_back(joint);
    }
  }

  out.labels = argmax_rows(soft_assign(encode(model, X), params, config.variant));
  out.autoencoder = std::move(model);
  out.params = std::move(params);
  return out;
}

Labels assign(const DeepClusterModel& dcm, const Matrix& X) {
  return argmax_rows(soft_assign(encode(dcm.autoencoder, X), dcm.params, dcm.variant));
}

PretrainResult pretrain_autoencoder(const Matrix& X, const DeepClusterConfig& config) {
  config.validate();
  auto model = build_autoencoder(static_cast<int>(X.cols()), config.embed_dim, config.hidden, config.activation,
                                 derive_seed(config.train.seed, 0xAE));
  return pretrain(std::move(model), X, config.train);
}

DeepClusterModel train_deep_cluster(const Matrix& X, int k, const DeepClusterConfig& config) {
  auto pre = pretrain_autoencoder(X, config);
  return finetune(std::move(pre.model), X, k, config);
}

}  // namespace tabclust
