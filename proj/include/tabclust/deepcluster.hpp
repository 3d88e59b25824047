#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tabclust/autoencoder.hpp"
#include "tabclust/common.hpp"
#include "tabclust/traditional.hpp"

namespace tabclust {

enum class Variant { StudentT, Gaussian };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Cluster parameters in embedding space. sigma/pi are used by the Gaussian
// variant only.
struct ClusterParams {
  Matrix mu;                  // K x d
  std::vector<Matrix> sigma;  // K of d x d, SPD
  Vector pi;                  // K, sums to 1

  int k() const { return static_cast<int>(mu.rows()); }
};

struct DeepClusterConfig {
  Variant variant = Variant::Gaussian;
  double gamma = 0.1;
  int embed_dim = 10;
  int finetune_epochs = 100;
  int target_update_interval = 10;
  TrainConfig train;  // train.epochs is the pretraining length
  // false drops the reconstruction term from the fine-tuning objective
  // (DEC-style); true keeps it (IDEC / Gaussian-variant style).
  bool reconstruction = true;
  std::vector<int> hidden{500, 500, 2000};
  Activation activation = Activation::Relu;
  double reg_covar = 1e-6;
  int kmeans_n_init = 10;

  void validate() const;
};

struct CollapseEvent {
  int epoch = 0;
  int cluster = 0;
  double mass = 0.0;
};

struct DeepClusterModel {
  AutoencoderModel autoencoder;
  ClusterParams params;
  Variant variant = Variant::Gaussian;
  std::vector<double> recon_history;
  std::vector<double> kl_history;  // mean per sample
  std::vector<double> joint_history;
  std::vector<CollapseEvent> collapses;
  Labels labels;  // argmax of the final soft assignment on the training data
};

ClusterParams init_clusters(const Matrix& Z, int k, Variant variant, std::uint64_t seed,
                            double reg_covar = 1e-6, int kmeans_n_init = 10);

// s_ij proportional to (1 + ||z_i - mu_j||^2)^-1.
Matrix soft_assign_student_t(const Matrix& Z, const ClusterParams& params);
// s_ij proportional to pi_j N(z_i; mu_j, Sigma_j), normalised in log space.
Matrix soft_assign_gaussian(const Matrix& Z, const ClusterParams& params);
Matrix soft_assign(const Matrix& Z, const ClusterParams& params, Variant variant);

// t_ij proportional to s_ij^2 / f_j with f_j = sum_i s_ij.
Matrix target_distribution(const Matrix& S);
// sum_ij T_ij log(T_ij / S_ij), with 0 log 0 = 0.
double kl_loss(const Matrix& T, const Matrix& S);
// reconstruction_loss + gamma * kl_loss / M.
double joint_loss(const Matrix& X, const Matrix& Xhat, const Matrix& T, const Matrix& S, double gamma);

struct ClusteringGradient {
  Matrix S;
  double kl = 0.0;  // mean over rows
  Matrix dZ;        // d(mean KL)/dZ, with T held fixed
  Matrix dMu;       // d(mean KL)/dmu (sigma and pi held fixed)
};

ClusteringGradient clustering_loss_gradient(const Matrix& Z, const Matrix& T, const ClusterParams& params,
                                            Variant variant);

// Joint fine-tuning of a pretrained autoencoder. With gamma == 0 the objective
// carries no clustering signal and the pretrained embedding is returned with
// its initial cluster parameters (the hybrid baseline).
DeepClusterModel finetune(AutoencoderModel model, const Matrix& X, int k, const DeepClusterConfig& config);

Labels assign(const DeepClusterModel& dcm, const Matrix& X);

// Builds the autoencoder for `config` (weights seeded from config.train.seed)
// and pretrains it on X. Hybrid baselines and deep runs sharing a config share
// this embedding exactly.
PretrainResult pretrain_autoencoder(const Matrix& X, const DeepClusterConfig& config);

// pretrain_autoencoder followed by finetune.
DeepClusterModel train_deep_cluster(const Matrix& X, int k, const DeepClusterConfig& config);

GmmModel as_gmm(const ClusterParams& params);
ClusterParams from_gmm(const GmmModel& gmm);

}  // namespace tabclust
