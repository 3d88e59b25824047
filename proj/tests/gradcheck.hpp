#pragma once

// Finite-difference check of the joint fine-tuning objective
//   L = recon(X, Xhat) + gamma * KL(T || S(Z)) / M      (T held fixed)
// against the analytic gradients from backward() and
// clustering_loss_gradient().

#include "oracles.hpp"
#include "tabclust/deepcluster.hpp"

namespace gradcheck {

using namespace tabclust;

struct Problem {
  AutoencoderModel model;
  Matrix X;
  Matrix T;
  ClusterParams params;
  Variant variant = Variant::StudentT;
  double gamma = 0.1;
  bool reconstruction = true;
};

inline double objective(const Problem& p) {
  const auto fwd = forward(p.model, p.X);
  const double recon = p.reconstruction ? reconstruction_loss(p.X, fwd.Xhat) : 0.0;
  const Matrix S = soft_assign(fwd.Z, p.params, p.variant);
  return recon + p.gamma * kl_loss(p.T, S) / static_cast<double>(p.X.rows());
}

// Builds a small random problem: 0-2 hidden layers, embedding size d, K = 2.
inline Problem make_problem(std::uint64_t seed, int n_hidden, int d, int m, Variant variant, Activation act) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  std::uniform_int_distribution<int> width(2, 6);
  const int input = d + width(rng);
  std::vector<int> hidden;
  for (int i = 0; i < n_hidden; ++i) hidden.push_back(width(rng) + 1);
  Problem p;
  p.model = build_autoencoder(input, d, hidden, act, seed);
  // Non-zero biases so no ReLU sits exactly on its kink.
  for (auto& b : p.model.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.3 * g(rng);
  p.X.resize(m, input);
  for (Eigen::Index i = 0; i < p.X.size(); ++i) p.X.data()[i] = g(rng);
  const Matrix Z = encode(p.model, p.X);
  p.params.mu.resize(2, d);
  for (Eigen::Index i = 0; i < p.params.mu.size(); ++i) p.params.mu.data()[i] = 0.5 * g(rng);
  if (variant == Variant::Gaussian) {
    for (int j = 0; j < 2; ++j) {
      Matrix A(d, d);
      for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = 0.4 * g(rng);
      p.params.sigma.push_back(A * A.transpose() + Matrix::Identity(d, d));
    }
    p.params.pi = Vector{{0.4, 0.6}};
  }
  p.variant = variant;
  p.T = target_distribution(soft_assign(Z, p.params, variant));
  return p;
}

// Largest relative error over every weight, bias and cluster centre. Central
// differences carry rounding noise of about eps * |L| / h, so the denominator
// floor scales with the objective; otherwise an exactly-zero gradient next to
// a large reconstruction loss reads as a large relative error.
inline double max_error(Problem p, double h = 1e-5) {
  const auto fwd = forward(p.model, p.X);
  const auto cg = clustering_loss_gradient(fwd.Z, p.T, p.params, p.variant);
  const Matrix dXhat =
      p.reconstruction ? reconstruction_loss_grad(p.X, fwd.Xhat) : Matrix::Zero(p.X.rows(), p.X.cols());
  const auto grads = backward(p.model, fwd.cache, dXhat, Matrix(p.gamma * cg.dZ));
  const Matrix dMu = p.gamma * cg.dMu;

  auto f = [&p] { return objective(p); };
  const double floor = 1e-6 * std::max(1.0, std::abs(f()));
  double worst = 0;
  for (std::size_t l = 0; l < p.model.weights.size(); ++l) {
    worst = std::max(worst, oracle::max_relative_error(grads.weights[l],
                                                       oracle::central_difference(p.model.weights[l], f, h), floor));
    worst = std::max(worst, oracle::max_relative_error(grads.biases[l],
                                                       oracle::central_difference(p.model.biases[l], f, h), floor));
  }
  worst = std::max(worst, oracle::max_relative_error(dMu, oracle::central_difference(p.params.mu, f, h), floor));
  return worst;
}

}  // namespace gradcheck
