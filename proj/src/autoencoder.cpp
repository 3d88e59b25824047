#include "tabclust/autoencoder.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "tabclust/data.hpp"

namespace tabclust {

namespace {

constexpr int kCheckpointVersion = 1;

Matrix activate(const Matrix& pre, Activation a) {
  if (a == Activation::Relu) return pre.cwiseMax(0.0);
  return pre.array().tanh();
}

// Multiplies `upstream` in place by the activation derivative at `pre`.
void activation_backward(Matrix& upstream, const Matrix& pre, Activation a) {
  if (a == Activation::Relu) {
    upstream = (pre.array() > 0.0).select(upstream, 0.0);
  } else {
    upstream.array() *= 1.0 - pre.array().tanh().square();
  }
}

Matrix affine(const Matrix& in, const Matrix& W, const Vector& b) {
  Matrix out = in * W.transpose();
  out.rowwise() += b.transpose();
  return out;
}

void check_input(const AutoencoderModel& model, const Matrix& X) {
  if (X.cols() != model.input_dim())
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(model.input_dim()) +
                                                  " columns, got " + std::to_string(X.cols()));
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw Error(ErrorKind::InvalidConfig, "checkpoint weight shape mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(r.size()) != cols)
      throw Error(ErrorKind::InvalidConfig, "checkpoint weight shape mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}


}  // namespace

void reset_optimizer(AutoencoderModel& model) {
  model.adam = AdamState{};
  for (int l = 0; l < model.n_layers(); ++l) {
    const auto& W = model.weights[static_cast<std::size_t>(l)];
    model.adam.m_weights.push_back(Matrix::Zero(W.rows(), W.cols()));
    model.adam.v_weights.push_back(Matrix::Zero(W.rows(), W.cols()));
    model.adam.m_biases.push_back(Vector::Zero(W.rows()));
    model.adam.v_biases.push_back(Vector::Zero(W.rows()));
  }
}

const char* to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw Error(ErrorKind::InvalidConfig, "activation: unknown value '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be > 0");
  if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be >= 1");
  if (epochs < 0) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 0");
}

bool AutoencoderModel::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

AutoencoderModel build_autoencoder(int input_dim, int embed_dim, const std::vector<int>& hidden,
                                   Activation activation, std::uint64_t seed) {
  if (input_dim < 1 || embed_dim < 1 ||
      std::any_of(hidden.begin(), hidden.end(), [](int h) { return h < 1; }))
    throw Error(ErrorKind::InvalidDimension, "layer widths must be >= 1");
  AutoencoderModel model;
  model.activation = activation;
  model.layer_dims.push_back(input_dim);
  model.layer_dims.insert(model.layer_dims.end(), hidden.begin(), hidden.end());
  model.layer_dims.push_back(embed_dim);
  model.layer_dims.insert(model.layer_dims.end(), hidden.rbegin(), hidden.rend());
  model.layer_dims.push_back(input_dim);

  // He-uniform: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const int fan_in = model.layer_dims[l];
    const int fan_out = model.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / fan_in);
    Matrix W(fan_out, fan_in);
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = limit * unit(rng);
    model.weights.push_back(std::move(W));
    model.biases.push_back(Vector::Zero(fan_out));
  }
  reset_optimizer(model);
  return model;
}

ForwardResult forward(const AutoencoderModel& model, const Matrix& batch) {
  check_input(model, batch);
  ForwardResult r;
  r.cache.version = model.version;
  r.cache.layer_dims = model.layer_dims;
  Matrix a = batch;
  for (int l = 0; l < model.n_layers(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    Matrix pre = affine(a, model.weights[li], model.biases[li]);
    r.cache.inputs.push_back(std::move(a));
    a = model.is_linear(l) ? pre : activate(pre, model.activation);
    r.cache.pre_activations.push_back(std::move(pre));
    if (l == model.encoder_layers() - 1) r.Z = a;
  }
  r.Xhat = std::move(a);
  return r;
}

Matrix encode(const AutoencoderModel& model, const Matrix& X) {
  check_input(model, X);
  Matrix a = X;
  for (int l = 0; l < model.encoder_layers(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    a = affine(a, model.weights[li], model.biases[li]);
    if (!model.is_linear(l)) a = activate(a, model.activation);
  }
  return a;
}

Matrix reconstruct(const AutoencoderModel& model, const Matrix& X) {
  Matrix a = encode(model, X);
  for (int l = model.encoder_layers(); l < model.n_layers(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    a = affine(a, model.weights[li], model.biases[li]);
    if (!model.is_linear(l)) a = activate(a, model.activation);
  }
  return a;
}

double reconstruction_loss(const Matrix& X, const Matrix& Xhat) {
  if (X.rows() != Xhat.rows() || X.cols() != Xhat.cols())
    throw Error(ErrorKind::DimensionMismatch, "reconstruction shape differs from input");
  if (X.rows() == 0) return 0.0;
  return (X - Xhat).squaredNorm() / static_cast<double>(X.rows());
}

Matrix reconstruction_loss_grad(const Matrix& X, const Matrix& Xhat) {
  if (X.rows() != Xhat.rows() || X.cols() != Xhat.cols())
    throw Error(ErrorKind::DimensionMismatch, "reconstruction shape differs from input");
  return (2.0 / static_cast<double>(X.rows())) * (Xhat - X);
}

Gradients backward(const AutoencoderModel& model, const ForwardCache& cache, const Matrix& dXhat,
                   const std::optional<Matrix>& dZ) {
  if (cache.version != model.version || cache.layer_dims != model.layer_dims ||
      static_cast<int>(cache.inputs.size()) != model.n_layers())
    throw Error(ErrorKind::StaleCache, "forward cache does not match the current parameters");
  const Eigen::Index m = cache.inputs.front().rows();
  if (dXhat.rows() != m || dXhat.cols() != model.input_dim())
    throw Error(ErrorKind::DimensionMismatch, "dXhat shape differs from the cached batch");
  if (dZ && (dZ->rows() != m || dZ->cols() != model.embed_dim()))
    throw Error(ErrorKind::DimensionMismatch, "dZ shape differs from the cached embedding");

  Gradients g;
  g.weights.resize(static_cast<std::size_t>(model.n_layers()));
  g.biases.resize(static_cast<std::size_t>(model.n_layers()));
  Matrix upstream = dXhat;  // d loss / d (output of layer l)
  for (int l = model.n_layers() - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    if (l == model.encoder_layers() - 1 && dZ) upstream += *dZ;
    if (!model.is_linear(l)) activation_backward(upstream, cache.pre_activations[li], model.activation);
    g.weights[li] = upstream.transpose() * cache.inputs[li];
    g.biases[li] = upstream.colwise().sum().transpose();
    if (l > 0) upstream = upstream * model.weights[li];
  }
  return g;
}

void adam_step(AutoencoderModel& model, const Gradients& grads, const TrainConfig& config) {
  if (grads.weights.size() != model.weights.size() || grads.biases.size() != model.biases.size())
    throw Error(ErrorKind::DimensionMismatch, "gradient layer count differs from the model");
  if (model.adam.m_weights.size() != model.weights.size()) reset_optimizer(model);
  const long step = ++model.adam.step;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    if (grads.weights[l].rows() != model.weights[l].rows() ||
        grads.weights[l].cols() != model.weights[l].cols() ||
        grads.biases[l].size() != model.biases[l].size())
      throw Error(ErrorKind::DimensionMismatch, "gradient shape differs at layer " + std::to_string(l));
    adam_update(model.weights[l], grads.weights[l], model.adam.m_weights[l], model.adam.v_weights[l], step,
                config);
    adam_update(model.biases[l], grads.biases[l], model.adam.m_biases[l], model.adam.v_biases[l], step,
                config);
  }
  ++model.version;
}

std::vector<std::vector<Eigen::Index>> shuffled_batches(Eigen::Index n, int batch_size,
                                                        std::mt19937_64& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Eigen::Index>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

PretrainResult pretrain(AutoencoderModel model, const Matrix& X, const TrainConfig& config) {
  config.validate();
  check_input(model, X);
  if (!X.allFinite()) throw Error(ErrorKind::DegenerateInput, "pretraining data must be finite");
  PretrainResult result;
  std::mt19937_64 rng(config.seed);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& idx : shuffled_batches(X.rows(), config.batch_size, rng)) {
      const Matrix batch = X(idx, Eigen::all);
      auto fwd = forward(model, batch);
      const Matrix dXhat = reconstruction_loss_grad(batch, fwd.Xhat);
      adam_step(model, backward(model, fwd.cache, dXhat), config);
    }
    const double loss = reconstruction_loss(X, reconstruct(model, X));
    if (!std::isfinite(loss) || !model.all_finite())
      throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch));
    result.loss_history.push_back(loss);
  }
  result.model = std::move(model);
  return result;
}

PretrainResult pretrain(AutoencoderModel model, const Dataset& ds, const TrainConfig& config) {
  if (ds.missing.any())
    throw Error(ErrorKind::DegenerateInput, "pretraining requires imputed, standardized data");
  return pretrain(std::move(model), ds.X, config);
}

nlohmann::json to_json(const AutoencoderModel& model) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    weights.push_back(matrix_json(model.weights[l]));
    biases.push_back(std::vector<double>(model.biases[l].data(),
                                         model.biases[l].data() + model.biases[l].size()));
  }
  return {{"format", "tabclust-autoencoder"},
          {"version", kCheckpointVersion},
          {"layer_dims", model.layer_dims},
          {"activation", to_string(model.activation)},
          {"weights", weights},
          {"biases", biases}};
}

AutoencoderModel autoencoder_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "tabclust-autoencoder" ||
      j.value("version", 0) != kCheckpointVersion)
    throw Error(ErrorKind::InvalidConfig, "not a version-1 autoencoder checkpoint");
  AutoencoderModel model;
  model.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  model.activation = activation_from_string(j.at("activation").get<std::string>());
  const std::size_t layers = model.layer_dims.size() - 1;
  if (model.layer_dims.size() < 3 || layers % 2 != 0 || j.at("weights").size() != layers ||
      j.at("biases").size() != layers)
    throw Error(ErrorKind::InvalidConfig, "checkpoint layer count mismatch");
  for (std::size_t l = 0; l < layers; ++l) {
    model.weights.push_back(matrix_from_json(j["weights"][l], model.layer_dims[l + 1], model.layer_dims[l]));
    const auto b = j["biases"][l].get<std::vector<double>>();
    if (static_cast<int>(b.size()) != model.layer_dims[l + 1])
      throw Error(ErrorKind::InvalidConfig, "checkpoint bias shape mismatch");
    model.biases.push_back(Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size())));
  }
  reset_optimizer(model);
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const AutoencoderModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << to_json(model).dump() << '\n';
}

AutoencoderModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return autoencoder_from_json(j);
}

}  // namespace tabclust
