#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tabclust/autoencoder.hpp"
#include "tabclust/data.hpp"

using namespace tabclust;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST(Build, PaperArchitecture) {
  const auto m = build_autoencoder(33, 10, {500, 500, 2000}, Activation::Relu, 1);
  EXPECT_EQ(m.layer_dims, (std::vector<int>{33, 500, 500, 2000, 10, 2000, 500, 500, 33}));
  EXPECT_EQ(m.n_layers(), 8);
  EXPECT_EQ(m.embed_dim(), 10);
  EXPECT_EQ(m.weights[0].rows(), 500);
  EXPECT_EQ(m.weights[0].cols(), 33);
}

TEST(Build, NoHiddenLayers) {
  const auto m = build_autoencoder(33, 4, {}, Activation::Relu, 1);
  EXPECT_EQ(m.layer_dims, (std::vector<int>{33, 4, 33}));
  EXPECT_TRUE(m.is_linear(0));
  EXPECT_TRUE(m.is_linear(1));
}

TEST(Build, SameSeedSameParameters) {
  const auto a = build_autoencoder(8, 3, {6}, Activation::Tanh, 42), b = build_autoencoder(8, 3, {6}, Activation::Tanh, 42);
  for (std::size_t l = 0; l < a.weights.size(); ++l) EXPECT_EQ(a.weights[l], b.weights[l]);
  const auto c = build_autoencoder(8, 3, {6}, Activation::Tanh, 43);
  EXPECT_NE(a.weights[0], c.weights[0]);
}

TEST(Build, InvalidDimension) {
  try {
    build_autoencoder(0, 3, {}, Activation::Relu, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidDimension);
  }
}

TEST(Forward, ZeroModelGivesZeroOutput) {
  auto m = build_autoencoder(5, 2, {4}, Activation::Relu, 1);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  EXPECT_TRUE(forward(m, random_matrix(7, 5, 3)).Xhat.isZero(0));
}

TEST(Forward, IdentityLinearModel) {
  auto m = build_autoencoder(4, 4, {}, Activation::Relu, 1);
  m.weights[0].setIdentity();
  m.weights[1].setIdentity();
  const Matrix X = random_matrix(6, 4, 2);
  EXPECT_EQ(forward(m, X).Xhat, X);
}

TEST(Forward, Shapes) {
  const auto m = build_autoencoder(33, 10, {16, 16, 64}, Activation::Relu, 1);
  const auto r = forward(m, random_matrix(256, 33, 4));
  EXPECT_EQ(r.Z.rows(), 256);
  EXPECT_EQ(r.Z.cols(), 10);
  EXPECT_EQ(r.Xhat.rows(), 256);
  EXPECT_EQ(r.Xhat.cols(), 33);
  EXPECT_EQ(encode(m, random_matrix(3, 33, 4)).cols(), 10);
}

TEST(Loss, Examples) {
  const Matrix X = random_matrix(5, 3, 1);
  EXPECT_EQ(reconstruction_loss(X, X), 0.0);
  EXPECT_DOUBLE_EQ(reconstruction_loss(Matrix{{1.0, 0.0}}, Matrix{{0.0, 0.0}}), 1.0);
  const Matrix Y = random_matrix(5, 3, 2);
  EXPECT_NEAR(reconstruction_loss(X, X + 2 * (Y - X)), 4 * reconstruction_loss(X, Y), 1e-12);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto m = build_autoencoder(5, 2, {4}, Activation::Relu, 1);
  const auto r = forward(m, random_matrix(3, 5, 1));
  const auto g = backward(m, r.cache, Matrix::Zero(3, 5), Matrix(Matrix::Zero(3, 2)));
  for (const auto& w : g.weights) EXPECT_TRUE(w.isZero(0));
  for (const auto& b : g.biases) EXPECT_TRUE(b.isZero(0));
}

TEST(Backward, EmbeddingGradientLeavesDecoderUntouched) {
  const auto m = build_autoencoder(5, 2, {4, 3}, Activation::Tanh, 1);
  const auto r = forward(m, random_matrix(3, 5, 1));
  const auto g = backward(m, r.cache, Matrix::Zero(3, 5), random_matrix(3, 2, 9));
  for (int l = m.encoder_layers(); l < m.n_layers(); ++l) {
    EXPECT_TRUE(g.weights[static_cast<std::size_t>(l)].isZero(0));
    EXPECT_TRUE(g.biases[static_cast<std::size_t>(l)].isZero(0));
  }
  EXPECT_FALSE(g.weights[0].isZero(0));
}

TEST(Backward, MatchesFiniteDifferences) {
  for (Activation act : {Activation::Relu, Activation::Tanh}) {
    auto m = build_autoencoder(5, 2, {4, 3}, act, 7);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 0.3);
    for (auto& b : m.biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = g(rng);
    const Matrix X = random_matrix(6, 5, 5);
    const auto r = forward(m, X);
    const auto grads = backward(m, r.cache, reconstruction_loss_grad(X, r.Xhat));
    auto f = [&] { return reconstruction_loss(X, reconstruct(m, X)); };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
      EXPECT_LT(oracle::max_relative_error(grads.weights[l], oracle::central_difference(m.weights[l], f, 1e-5)), 1e-4);
      EXPECT_LT(oracle::max_relative_error(grads.biases[l], oracle::central_difference(m.biases[l], f, 1e-5)), 1e-4);
    }
  }
}

TEST(Backward, StaleCacheRejected) {
  auto m = build_autoencoder(4, 2, {3}, Activation::Relu, 1);
  const Matrix X = random_matrix(3, 4, 1);
  const auto r = forward(m, X);
  const auto g = backward(m, r.cache, reconstruction_loss_grad(X, r.Xhat));
  adam_step(m, g, TrainConfig{});
  try {
    backward(m, r.cache, reconstruction_loss_grad(X, r.Xhat));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StaleCache);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto m = build_autoencoder(4, 2, {3}, Activation::Relu, 1);
  const auto before = m.weights;
  Gradients zero;
  for (const auto& w : m.weights) zero.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : m.biases) zero.biases.push_back(Vector::Zero(b.size()));
  adam_step(m, zero, TrainConfig{});
  for (std::size_t l = 0; l < before.size(); ++l) EXPECT_EQ(m.weights[l], before[l]);
  EXPECT_EQ(m.adam.step, 1);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  TrainConfig c;
  c.learning_rate = 0.01;
  Matrix p = Matrix::Zero(1, 2), m = p, v = p;
  const Matrix g{{0.5, -3.0}};
  for (long step = 1; step <= 200; ++step) {
    const Matrix before = p;
    adam_update(p, g, m, v, step, c);
    if (step > 100) {
      EXPECT_NEAR(p(0, 0) - before(0, 0), -0.01, 1e-6);
      EXPECT_NEAR(p(0, 1) - before(0, 1), 0.01, 1e-6);
    }
  }
}

TEST(Adam, IdenticalInputsIdenticalUpdates) {
  auto a = build_autoencoder(4, 2, {3}, Activation::Relu, 5), b = a;
  const Matrix X = random_matrix(4, 4, 2);
  for (auto* m : {&a, &b}) {
    const auto r = forward(*m, X);
    adam_step(*m, backward(*m, r.cache, reconstruction_loss_grad(X, r.Xhat)), TrainConfig{});
  }
  for (std::size_t l = 0; l < a.weights.size(); ++l) EXPECT_EQ(a.weights[l], b.weights[l]);
}

TEST(Pretrain, ZeroEpochs) {
  const auto m = build_autoencoder(4, 2, {3}, Activation::Relu, 5);
  TrainConfig c;
  c.epochs = 0;
  const auto r = pretrain(m, random_matrix(20, 4, 1), c);
  EXPECT_TRUE(r.loss_history.empty());
  EXPECT_EQ(r.model.weights[0], m.weights[0]);
}

TEST(Pretrain, LossDropsOnSyntheticCohort) {
  auto ds = generate_synthetic({500, 33, 1 / 1.9, 2.0, ClusterShape::Correlated, 0.0, 3});
  ds = standardize(ds).first;
  const auto m = build_autoencoder(33, 10, {32, 32, 128}, Activation::Relu, 1);
  const double initial = reconstruction_loss(ds.X, reconstruct(m, ds.X));
  TrainConfig c;
  c.epochs = 200;
  const auto r = pretrain(m, ds, c);
  ASSERT_EQ(r.loss_history.size(), 200u);
  EXPECT_LT(r.loss_history.back(), 0.5 * initial);
  double first10 = 0, last10 = 0;
  for (int i = 0; i < 10; ++i) {
    first10 += r.loss_history[static_cast<std::size_t>(i)];
    last10 += r.loss_history[r.loss_history.size() - 1 - static_cast<std::size_t>(i)];
  }
  EXPECT_LT(last10, first10);
}

TEST(Pretrain, SameSeedSameHistory) {
  const Matrix X = random_matrix(100, 6, 1);
  TrainConfig c;
  c.epochs = 5;
  c.batch_size = 32;
  c.seed = 11;
  const auto m = build_autoencoder(6, 2, {5}, Activation::Relu, 3);
  EXPECT_EQ(pretrain(m, X, c).loss_history, pretrain(m, X, c).loss_history);
}

TEST(Pretrain, NonFiniteLoss) {
  auto m = build_autoencoder(3, 2, {}, Activation::Relu, 3);
  TrainConfig c;
  c.epochs = 3;
  c.learning_rate = 1e200;
  try {
    pretrain(m, Matrix(random_matrix(20, 3, 1) * 1e150), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteLoss);
  }
}

TEST(Pretrain, RejectsMissingValues) {
  auto ds = generate_synthetic({50, 3, 0.5, 1.0, ClusterShape::Spherical, 0.2, 1});
  EXPECT_THROW(pretrain(build_autoencoder(3, 2, {}, Activation::Relu, 1), ds, TrainConfig{}), Error);
}

TEST(Batches, CoverEveryRowOnce) {
  std::mt19937_64 rng(1);
  const auto batches = shuffled_batches(10, 4, rng);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[2].size(), 2u);
  std::vector<int> seen(10, 0);
  for (const auto& b : batches)
    for (auto i : b) ++seen[static_cast<std::size_t>(i)];
  EXPECT_EQ(seen, std::vector<int>(10, 1));
}

TEST(Checkpoint, RoundTrip) {
  auto m = build_autoencoder(5, 2, {4}, Activation::Tanh, 1);
  const auto path = std::filesystem::temp_directory_path() / "tabclust_ae.json";
  save_checkpoint(path, m);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.layer_dims, m.layer_dims);
  EXPECT_EQ(back.activation, m.activation);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    EXPECT_EQ(back.weights[l], m.weights[l]);
    EXPECT_EQ(back.biases[l], m.biases[l]);
  }
}
