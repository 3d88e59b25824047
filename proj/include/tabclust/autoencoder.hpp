#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabclust/common.hpp"

namespace tabclust {

struct Dataset;

enum class Activation { Relu, Tanh };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 200;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  long step = 0;
};

// Symmetric fully-connected autoencoder. Layer l maps layer_dims[l] ->
// layer_dims[l + 1] with weights[l] of shape (out x in). The bottleneck layer
// and the output layer are linear; every other layer applies `activation`.
struct AutoencoderModel {
  std::vector<int> layer_dims;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Activation activation = Activation::Relu;
  AdamState adam;
  // Incremented whenever the optimiser mutates parameters; forward caches
  // remember it so gradients are never taken against stale activations.
  std::uint64_t version = 0;

  int n_layers() const { return static_cast<int>(weights.size()); }
  int encoder_layers() const { return n_layers() / 2; }
  int input_dim() const { return layer_dims.front(); }
  int embed_dim() const { return layer_dims[static_cast<std::size_t>(encoder_layers())]; }
  bool is_linear(int layer) const { return layer == encoder_layers() - 1 || layer == n_layers() - 1; }
  bool all_finite() const;
};

struct ForwardCache {
  std::vector<Matrix> inputs;           // input to each layer
  std::vector<Matrix> pre_activations;  // affine output of each layer
  std::uint64_t version = 0;
  std::vector<int> layer_dims;
};

struct ForwardResult {
  Matrix Z;
  Matrix Xhat;
  ForwardCache cache;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

AutoencoderModel build_autoencoder(int input_dim, int embed_dim, const std::vector<int>& hidden,
                                   Activation activation, std::uint64_t seed);

ForwardResult forward(const AutoencoderModel& model, const Matrix& batch);
// Cache-free passes for evaluation.
Matrix encode(const AutoencoderModel& model, const Matrix& X);
Matrix reconstruct(const AutoencoderModel& model, const Matrix& X);

// Mean over rows of the squared Euclidean reconstruction error.
double reconstruction_loss(const Matrix& X, const Matrix& Xhat);
// d reconstruction_loss / d Xhat.
Matrix reconstruction_loss_grad(const Matrix& X, const Matrix& Xhat);

Gradients backward(const AutoencoderModel& model, const ForwardCache& cache, const Matrix& dXhat,
                   const std::optional<Matrix>& dZ = std::nullopt);

// Zeroes the Adam moments and step counter.
void reset_optimizer(AutoencoderModel& model);

// One Adam update of every parameter; bumps the step counter and version.
void adam_step(AutoencoderModel& model, const Gradients& grads, const TrainConfig& config);

// Bias-corrected Adam update of a single parameter block at step `step` (>= 1).
template <typename Param>
void adam_update(Param& param, const Param& grad, Param& m, Param& v, long step,
                 const TrainConfig& config) {
  m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad;
  v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
  param.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config.adam_eps);
}

struct PretrainResult {
  AutoencoderModel model;
  std::vector<double> loss_history;  // full-data loss after each epoch
};

PretrainResult pretrain(AutoencoderModel model, const Matrix& X, const TrainConfig& config);
PretrainResult pretrain(AutoencoderModel model, const Dataset& ds, const TrainConfig& config);

// Epoch-wise shuffled mini-batch index lists; the last batch may be short.
std::vector<std::vector<Eigen::Index>> shuffled_batches(Eigen::Index n, int batch_size,
                                                        std::mt19937_64& rng);

nlohmann::json to_json(const AutoencoderModel& model);
AutoencoderModel autoencoder_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const AutoencoderModel& model);
AutoencoderModel load_checkpoint(const std::filesystem::path& path);

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

}  // namespace tabclust
