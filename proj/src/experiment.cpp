#include "tabclust/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include "tabclust/report.hpp"

namespace tabclust {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::InvalidConfig, path + ": " + msg);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) invalid(path + "." + key, "unknown field");
}

const json* find(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_real(const json& obj, const std::string& key, double fallback, const std::string& path) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) invalid(path + "." + key, "expected a number");
  return v->get<double>();
}

long long get_int(const json& obj, const std::string& key, long long fallback, const std::string& path,
                  long long min_value) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) invalid(path + "." + key, "expected an integer");
  const long long x = v->get<long long>();
  if (x < min_value) invalid(path + "." + key, "must be >= " + std::to_string(min_value));
  return x;
}

std::string get_string(const json& obj, const std::string& key, const std::string& fallback,
                       const std::string& path) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) invalid(path + "." + key, "expected a string");
  return v->get<std::string>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback, const std::string& path) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) invalid(path + "." + key, "expected true or false");
  return v->get<bool>();
}

std::vector<int> get_int_list(const json& obj, const std::string& key, const std::string& path) {
  const json* v = find(obj, key);
  if (!v) return {};
  if (!v->is_array() || v->empty()) invalid(path + "." + key, "expected a non-empty list of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const json& e = (*v)[i];
    if (!e.is_number_integer() || e.get<long long>() < 1)
      invalid(path + "." + key + "[" + std::to_string(i) + "]", "expected a positive integer");
    out.push_back(e.get<int>());
  }
  return out;
}

std::uint64_t get_seed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  invalid(path, "expected a non-negative integer");
}

struct KindInfo {
  const char* name;
  MethodKind kind;
};

constexpr KindInfo kKinds[] = {
    {"kmeans_x", MethodKind::KMeansX},
    {"gmm_x", MethodKind::GmmX},
    {"kmeans_z", MethodKind::KMeansZ},
    {"gmm_z", MethodKind::GmmZ},
    {"deep_student_t", MethodKind::DeepStudentT},
    {"deep_student_t_recon", MethodKind::DeepStudentTRecon},
    {"deep_gaussian", MethodKind::DeepGaussian},
    {"deep_gaussian_sweep", MethodKind::DeepGaussianSweep},
    {"kgg", MethodKind::Kgg},
};

bool is_kmeans(MethodKind k) { return k == MethodKind::KMeansX || k == MethodKind::KMeansZ; }
bool is_gmm(MethodKind k) { return k == MethodKind::GmmX || k == MethodKind::GmmZ; }
bool is_deep(MethodKind k) {
  return k == MethodKind::DeepStudentT || k == MethodKind::DeepStudentTRecon || k == MethodKind::DeepGaussian ||
         k == MethodKind::DeepGaussianSweep;
}
bool is_gaussian_deep(MethodKind k) { return k == MethodKind::DeepGaussian || k == MethodKind::DeepGaussianSweep; }

// Autoencoder and schedule defaults for each profile. The desk network keeps
// the 1:1:4 hidden shape of the full-size one at a width a laptop trains in
// seconds.
DeepClusterConfig profile_defaults(EpochsProfile profile, MethodKind kind) {
  DeepClusterConfig c;
  c.embed_dim = 10;
  c.gamma = 0.1;
  c.target_update_interval = 10;
  c.train.learning_rate = 1e-3;
  c.train.batch_size = 256;
  if (profile == EpochsProfile::Desk) {
    c.hidden = {32, 32, 128};
    c.train.epochs = 200;
    c.finetune_epochs = 100;
  } else {
    c.hidden = {500, 500, 2000};
    c.train.epochs = 1000;
    c.finetune_epochs = 1000;
    if (is_gaussian_deep(kind)) {
      c.finetune_epochs = 10000;
      c.train.learning_rate = 1e-5;
    }
  }
  c.variant = is_gaussian_deep(kind) ? Variant::Gaussian : Variant::StudentT;
  c.reconstruction = kind != MethodKind::DeepStudentT;
  if (!is_deep(kind)) c.finetune_epochs = 0;
  return c;
}

CovarianceType cov_type_from(const std::string& s, const std::string& path) {
  if (s == "full") return CovarianceType::Full;
  if (s == "diagonal" || s == "diag") return CovarianceType::Diagonal;
  invalid(path, "unknown covariance type '" + s + "'");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

const char* to_string(EpochsProfile p) { return p == EpochsProfile::Desk ? "desk" : "paper"; }

EpochsProfile profile_from_string(const std::string& s) {
  if (s == "desk") return EpochsProfile::Desk;
  if (s == "paper") return EpochsProfile::Paper;
  throw Error(ErrorKind::InvalidConfig, "epochs_profile: expected 'desk' or 'paper', got '" + s + "'");
}

const char* to_string(MethodKind k) {
  for (const auto& info : kKinds)
    if (info.kind == k) return info.name;
  return "unknown";
}

MethodKind method_kind_from_string(const std::string& s) {
  for (const auto& info : kKinds)
    if (s == info.name) return info.kind;
  throw Error(ErrorKind::InvalidConfig, "unknown method kind '" + s + "'");
}

bool MethodSpec::uses_autoencoder() const { return kind != MethodKind::KMeansX && kind != MethodKind::GmmX && kind != MethodKind::Kgg; }

MethodSpec parse_method(const json& j, EpochsProfile profile, const std::string& path) {
  if (!j.is_object()) invalid(path, "expected an object");
  reject_unknown(j, {"name", "kind", "params"}, path);
  MethodSpec m;
  m.name = get_string(j, "name", "", path);
  if (m.name.empty()) invalid(path + ".name", "required");
  if (m.name.find_first_of(",/\\\n\"") != std::string::npos)
    invalid(path + ".name", "must not contain separators or quotes");
  const std::string kind = get_string(j, "kind", "", path);
  if (kind.empty()) invalid(path + ".kind", "required");
  try {
    m.kind = method_kind_from_string(kind);
  } catch (const Error&) {
    invalid(path + ".kind", "unknown method kind '" + kind + "'");
  }
  if (const json* p = find(j, "params")) {
    if (!p->is_object()) invalid(path + ".params", "expected an object");
    m.params = *p;
  }
  const std::string pp = path + ".params";
  const json& p = m.params;

  std::set<std::string> allowed{"seed"};
  if (is_kmeans(m.kind)) allowed.insert({"n_init", "max_iter", "tol"});
  if (is_gmm(m.kind)) allowed.insert({"cov_type", "max_iter", "tol", "reg_covar"});
  if (m.uses_autoencoder())
    allowed.insert({"embed_dim", "hidden", "activation", "learning_rate", "batch_size", "pretrain_epochs"});
  if (is_deep(m.kind))
    allowed.insert({"gamma", "finetune_epochs", "target_update_interval", "reg_covar", "kmeans_n_init"});
  if (m.kind == MethodKind::DeepGaussianSweep) allowed.insert({"dims"});
  if (m.kind == MethodKind::Kgg) allowed = {"voters"};
  reject_unknown(p, allowed, pp);

  if (const json* s = find(p, "seed")) m.seed = get_seed(*s, pp + ".seed");

  m.kmeans.n_init = static_cast<int>(get_int(p, "n_init", m.kmeans.n_init, pp, 1));
  m.kmeans.max_iter = static_cast<int>(get_int(p, "max_iter", m.kmeans.max_iter, pp, 1));
  m.kmeans.tol = get_real(p, "tol", m.kmeans.tol, pp);
  m.gmm.max_iter = static_cast<int>(get_int(p, "max_iter", m.gmm.max_iter, pp, 1));
  m.gmm.tol = get_real(p, "tol", m.gmm.tol, pp);
  m.gmm.reg_covar = get_real(p, "reg_covar", m.gmm.reg_covar, pp);
  m.gmm.cov_type = cov_type_from(get_string(p, "cov_type", "full", pp), pp + ".cov_type");
  if (!(m.kmeans.tol >= 0.0) || !(m.gmm.tol >= 0.0)) invalid(pp + ".tol", "must be >= 0");
  if (!(m.gmm.reg_covar > 0.0)) invalid(pp + ".reg_covar", "must be > 0");

  DeepClusterConfig& c = m.deep;
  c = profile_defaults(profile, m.kind);
  c.embed_dim = static_cast<int>(get_int(p, "embed_dim", c.embed_dim, pp, 1));
  if (find(p, "hidden")) {
    const json& h = p["hidden"];
    if (!h.is_array()) invalid(pp + ".hidden", "expected a list of layer widths");
    c.hidden.clear();
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (!h[i].is_number_integer() || h[i].get<long long>() < 1)
        invalid(pp + ".hidden[" + std::to_string(i) + "]", "expected a positive integer");
      c.hidden.push_back(h[i].get<int>());
    }
  }
  try {
    c.activation = activation_from_string(get_string(p, "activation", to_string(c.activation), pp));
  } catch (const Error& e) {
    invalid(pp + ".activation", e.what());
  }
  c.train.learning_rate = get_real(p, "learning_rate", c.train.learning_rate, pp);
  if (!(c.train.learning_rate > 0.0)) invalid(pp + ".learning_rate", "must be > 0");
  c.train.batch_size = static_cast<int>(get_int(p, "batch_size", c.train.batch_size, pp, 1));
  c.train.epochs = static_cast<int>(get_int(p, "pretrain_epochs", c.train.epochs, pp, 0));
  if (is_deep(m.kind)) {
    c.gamma = get_real(p, "gamma", c.gamma, pp);
    if (!(c.gamma >= 0.0)) invalid(pp + ".gamma", "must be >= 0");
    c.finetune_epochs = static_cast<int>(get_int(p, "finetune_epochs", c.finetune_epochs, pp, 0));
    c.target_update_interval =
        static_cast<int>(get_int(p, "target_update_interval", c.target_update_interval, pp, 1));
    c.reg_covar = get_real(p, "reg_covar", c.reg_covar, pp);
    if (!(c.reg_covar > 0.0)) invalid(pp + ".reg_covar", "must be > 0");
    c.kmeans_n_init = static_cast<int>(get_int(p, "kmeans_n_init", c.kmeans_n_init, pp, 1));
  }
  m.sweep_dims = get_int_list(p, "dims", pp);

  if (m.kind == MethodKind::Kgg) {
    if (const json* v = find(p, "voters")) {
      if (!v->is_array() || v->size() != 3) invalid(pp + ".voters", "expected three method names");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!(*v)[i].is_string()) invalid(pp + ".voters[" + std::to_string(i) + "]", "expected a method name");
        m.voters.push_back((*v)[i].get<std::string>());
      }
    }
  }
  return m;
}

json MethodSpec::resolved_json() const {
  json j = {{"name", name}, {"kind", to_string(kind)}};
  if (seed) j["seed"] = *seed;
  if (is_kmeans(kind)) j["kmeans"] = {{"n_init", kmeans.n_init}, {"max_iter", kmeans.max_iter}, {"tol", kmeans.tol}};
  if (is_gmm(kind))
    j["gmm"] = {{"cov_type", gmm.cov_type == CovarianceType::Full ? "full" : "diagonal"},
                {"max_iter", gmm.max_iter},
                {"tol", gmm.tol},
                {"reg_covar", gmm.reg_covar}};
  if (uses_autoencoder()) {
    j["autoencoder"] = {{"hidden", deep.hidden},
                        {"embed_dim", deep.embed_dim},
                        {"activation", to_string(deep.activation)},
                        {"learning_rate", deep.train.learning_rate},
                        {"batch_size", deep.train.batch_size},
                        {"pretrain_epochs", deep.train.epochs}};
  }
  if (is_deep(kind)) {
    j["deep"] = {{"variant", to_string(deep.variant)},
                 {"gamma", deep.gamma},
                 {"reconstruction", deep.reconstruction},
                 {"finetune_epochs", deep.finetune_epochs},
                 {"target_update_interval", deep.target_update_interval},
                 {"reg_covar", deep.reg_covar},
                 {"kmeans_n_init", deep.kmeans_n_init}};
  }
  if (kind == MethodKind::DeepGaussianSweep) j["dims"] = sweep_dims;
  if (kind == MethodKind::Kgg) j["voters"] = voters;
  return j;
}

std::optional<std::size_t> default_cohort_size(EpochsProfile profile) {
  if (profile == EpochsProfile::Desk) return std::size_t{2000};
  return std::nullopt;
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) invalid("config", "expected a JSON object");
  reject_unknown(j, {"data", "cohorts", "methods", "seed", "output_dir", "epochs_profile", "preprocess", "threads"},
                 "config");
  ExperimentConfig cfg;
  cfg.raw = j;

  const json* seed = find(j, "seed");
  if (!seed) invalid("seed", "required");
  cfg.seed = get_seed(*seed, "seed");
  cfg.output_dir = get_string(j, "output_dir", cfg.output_dir.string(), "config");
  cfg.profile = profile_from_string(get_string(j, "epochs_profile", "desk", "config"));
  cfg.threads = static_cast<unsigned>(get_int(j, "threads", 1, "config", 1));

  if (const json* pre = find(j, "preprocess")) {
    if (!pre->is_object()) invalid("preprocess", "expected an object");
    reject_unknown(*pre, {"apply_bounds", "max_missing_rate", "standardize"}, "preprocess");
    cfg.preprocess.apply_bounds = get_bool(*pre, "apply_bounds", true, "preprocess");
    cfg.preprocess.max_missing_rate = get_real(*pre, "max_missing_rate", 0.05, "preprocess");
    if (!(cfg.preprocess.max_missing_rate >= 0.0 && cfg.preprocess.max_missing_rate <= 1.0))
      invalid("preprocess.max_missing_rate", "must lie in [0, 1]");
    cfg.preprocess.standardize = get_bool(*pre, "standardize", true, "preprocess");
  }

  const json* data = find(j, "data");
  if (!data || !data->is_object()) invalid("data", "required object");
  reject_unknown(*data, {"synthetic", "csv", "schema", "label_column", "missing_tokens"}, "data");
  if (const json* syn = find(*data, "synthetic")) {
    if (find(*data, "csv")) invalid("data", "give either synthetic or csv, not both");
    if (!syn->is_object()) invalid("data.synthetic", "expected an object");
    reject_unknown(*syn, {"n_samples", "n_features", "class_ratio", "separation", "cluster_shape", "missing_rate", "seed"},
                   "data.synthetic");
    try {
      cfg.data.synthetic = synthetic_spec_from_json(*syn);
    } catch (const Error& e) {
      invalid("data.synthetic", e.what());
    } catch (const json::exception& e) {
      invalid("data.synthetic", e.what());
    }
  } else {
    const std::string csv = get_string(*data, "csv", "", "data");
    const std::string schema = get_string(*data, "schema", "", "data");
    if (csv.empty()) invalid("data.csv", "required when no synthetic spec is given");
    if (schema.empty()) invalid("data.schema", "required with a csv source");
    cfg.data.csv_path = std::filesystem::path(csv).is_absolute() ? std::filesystem::path(csv) : base_dir / csv;
    cfg.data.schema_path =
        std::filesystem::path(schema).is_absolute() ? std::filesystem::path(schema) : base_dir / schema;
    cfg.data.label_column = get_string(*data, "label_column", "label", "data");
    if (const json* tokens = find(*data, "missing_tokens")) {
      if (!tokens->is_array()) invalid("data.missing_tokens", "expected a list of strings");
      cfg.data.missing_tokens.clear();
      for (std::size_t i = 0; i < tokens->size(); ++i) {
        if (!(*tokens)[i].is_string()) invalid("data.missing_tokens[" + std::to_string(i) + "]", "expected a string");
        cfg.data.missing_tokens.push_back((*tokens)[i].get<std::string>());
      }
    }
  }

  if (const json* cohorts = find(j, "cohorts")) {
    if (!cohorts->is_array() || cohorts->empty()) invalid("cohorts", "expected a non-empty list");
    std::set<std::string> names;
    for (std::size_t i = 0; i < cohorts->size(); ++i) {
      const std::string path = "cohorts[" + std::to_string(i) + "]";
      const json& c = (*cohorts)[i];
      if (!c.is_object()) invalid(path, "expected an object");
      reject_unknown(c, {"name", "n_samples", "class_ratio", "filter", "synthetic"}, path);
      CohortRule rule;
      rule.name = get_string(c, "name", "", path);
      if (rule.name.empty()) invalid(path + ".name", "required");
      if (rule.name.find_first_of(",/\\\n\"") != std::string::npos)
        invalid(path + ".name", "must not contain separators or quotes");
      if (!names.insert(rule.name).second) invalid(path + ".name", "duplicate cohort '" + rule.name + "'");
      if (find(c, "n_samples")) rule.n_samples = static_cast<std::size_t>(get_int(c, "n_samples", 0, path, 2));
      if (find(c, "class_ratio")) {
        rule.class_ratio = get_real(c, "class_ratio", 0.0, path);
        if (!(*rule.class_ratio > 0.0 && *rule.class_ratio <= 1.0)) invalid(path + ".class_ratio", "must lie in (0, 1]");
      }
      if (const json* f = find(c, "filter")) {
        if (cfg.data.synthetic) invalid(path + ".filter", "only applies to csv sources");
        if (!f->is_object()) invalid(path + ".filter", "expected {column, value}");
        reject_unknown(*f, {"column", "value"}, path + ".filter");
        rule.filter_column = get_string(*f, "column", "", path + ".filter");
        if (rule.filter_column->empty()) invalid(path + ".filter.column", "required");
        if (!find(*f, "value")) invalid(path + ".filter.value", "required");
        rule.filter_value = get_real(*f, "value", 0.0, path + ".filter");
      }
      if (const json* s = find(c, "synthetic")) {
        if (!cfg.data.synthetic) invalid(path + ".synthetic", "only applies to synthetic sources");
        if (!s->is_object()) invalid(path + ".synthetic", "expected an object");
        reject_unknown(*s, {"n_samples", "n_features", "class_ratio", "separation", "cluster_shape", "missing_rate", "seed"},
                       path + ".synthetic");
        json merged = synthetic_spec_to_json(*cfg.data.synthetic);
        merged.update(*s);
        try {
          synthetic_spec_from_json(merged);
        } catch (const std::exception& e) {
          invalid(path + ".synthetic", e.what());
        }
        rule.synthetic = *s;
      }
      cfg.cohorts.push_back(std::move(rule));
    }
  } else {
    CohortRule all;
    all.name = "all";
    cfg.cohorts.push_back(all);
  }

  const json* methods = find(j, "methods");
  if (!methods || !methods->is_array() || methods->empty()) invalid("methods", "at least one method is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < methods->size(); ++i) {
    const std::string path = "methods[" + std::to_string(i) + "]";
    MethodSpec m = parse_method((*methods)[i], cfg.profile, path);
    if (!names.insert(m.name).second) invalid(path + ".name", "duplicate method '" + m.name + "'");
    cfg.methods.push_back(std::move(m));
  }

  // KGG voters: explicit names, or the first method of each voter kind.
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    MethodSpec& m = cfg.methods[i];
    if (m.kind != MethodKind::Kgg) continue;
    const std::string path = "methods[" + std::to_string(i) + "].params.voters";
    const MethodKind wanted[3] = {MethodKind::KMeansX, MethodKind::GmmX, MethodKind::DeepGaussianSweep};
    if (m.voters.empty()) {
      for (MethodKind w : wanted) {
        const auto it = std::find_if(cfg.methods.begin(), cfg.methods.end(),
                                     [&](const MethodSpec& o) { return o.kind == w; });
        if (it == cfg.methods.end())
          invalid(path, std::string("kgg needs a ") + to_string(w) + " method among its voters");
        m.voters.push_back(it->name);
      }
    } else {
      for (std::size_t v = 0; v < 3; ++v) {
        const auto it = std::find_if(cfg.methods.begin(), cfg.methods.end(),
                                     [&](const MethodSpec& o) { return o.name == m.voters[v]; });
        if (it == cfg.methods.end()) invalid(path + "[" + std::to_string(v) + "]", "no method named '" + m.voters[v] + "'");
        if (it->kind != wanted[v])
          invalid(path + "[" + std::to_string(v) + "]",
                  "'" + m.voters[v] + "' must be of kind " + to_string(wanted[v]));
      }
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, "config: " + std::string(e.what()));
  }
  return parse_experiment_config(j, path.parent_path());
}

Dataset preprocess_cohort(const Dataset& raw, const PreprocessConfig& pre, std::optional<std::size_t> n_samples,
                          std::optional<double> class_ratio, std::uint64_t seed) {
  Dataset ds = pre.apply_bounds ? apply_bounds(raw) : raw;
  ds = filter_missing_rate(ds, pre.max_missing_rate);
  if (n_samples && *n_samples < static_cast<std::size_t>(ds.n_samples())) {
    if (!ds.labels) throw Error(ErrorKind::InvalidConfig, "cohort subsampling needs labels");
    double ratio = 0.0;
    if (class_ratio) {
      ratio = *class_ratio;
    } else {
      const auto ones = std::count(ds.labels->begin(), ds.labels->end(), 1);
      const auto zeros = static_cast<long>(ds.labels->size()) - ones;
      ratio = static_cast<double>(std::min<long>(ones, zeros)) / static_cast<double>(std::max<long>(std::max<long>(ones, zeros), 1));
    }
    ds = stratified_subsample(ds, *n_samples, ratio, seed);
  }
  ds = impute_median(ds);
  if (pre.standardize) ds = standardize(ds).first;
  return ds;
}

MethodResult run_method(const MethodSpec& method, const Matrix& X, int k, std::uint64_t seed, unsigned threads) {
  if (!X.allFinite()) throw Error(ErrorKind::DegenerateInput, "method input must be imputed and finite");
  MethodResult r;
  DeepClusterConfig cfg = method.deep;
  cfg.train.seed = seed;
  switch (method.kind) {
    case MethodKind::KMeansX:
      r.labels = kmeans_fit(X, k, seed, method.kmeans).labels;
      break;
    case MethodKind::GmmX:
      r.labels = gmm_predict(gmm_fit(X, k, seed, method.gmm), X).labels;
      break;
    case MethodKind::KMeansZ:
    case MethodKind::GmmZ: {
      auto pre = pretrain_autoencoder(X, cfg);
      Matrix Z = encode(pre.model, X);
      r.labels = method.kind == MethodKind::KMeansZ ? kmeans_fit(Z, k, seed, method.kmeans).labels
                                                    : gmm_predict(gmm_fit(Z, k, seed, method.gmm), Z).labels;
      r.embedding = std::move(Z);
      r.pretrain_loss = std::move(pre.loss_history);
      break;
    }
    case MethodKind::DeepStudentT:
    case MethodKind::DeepStudentTRecon:
    case MethodKind::DeepGaussian: {
      auto pre = pretrain_autoencoder(X, cfg);
      r.pretrain_loss = std::move(pre.loss_history);
      auto dcm = finetune(std::move(pre.model), X, k, cfg);
      r.embedding = encode(dcm.autoencoder, X);
      r.labels = std::move(dcm.labels);
      r.recon_history = std::move(dcm.recon_history);
      r.kl_history = std::move(dcm.kl_history);
      r.joint_history = std::move(dcm.joint_history);
      break;
    }
    case MethodKind::DeepGaussianSweep: {
      const auto dims = method.sweep_dims.empty() ? sweep_dims(static_cast<int>(X.cols())) : method.sweep_dims;
      auto sweep = run_dimension_sweep(X, k, dims, cfg, threads);
      r.labels = dimension_ensemble(sweep.labels);
      r.sweep = std::move(sweep);
      break;
    }
    case MethodKind::Kgg:
      throw Error(ErrorKind::InvalidConfig, "kgg is an ensemble of other methods and cannot run on its own");
  }
  return r;
}

namespace {

std::vector<Dataset> build_cohorts(const ExperimentConfig& cfg, json& cohort_manifest) {
  std::vector<Dataset> out;
  std::optional<Dataset> loaded;
  std::vector<FeatureSpec> specs;
  if (!cfg.data.synthetic) {
    specs = load_feature_specs(cfg.data.schema_path);
    CsvOptions opts;
    opts.label_column = cfg.data.label_column;
    opts.missing_tokens = cfg.data.missing_tokens;
    for (const auto& c : cfg.cohorts)
      if (c.filter_column &&
          std::find(opts.side_columns.begin(), opts.side_columns.end(), *c.filter_column) == opts.side_columns.end())
        opts.side_columns.push_back(*c.filter_column);
    loaded = load_csv(cfg.data.csv_path, specs, opts);
  }
  const auto default_n = default_cohort_size(cfg.profile);
  for (std::size_t ci = 0; ci < cfg.cohorts.size(); ++ci) {
    const CohortRule& rule = cfg.cohorts[ci];
    const std::uint64_t cohort_seed = derive_seed(cfg.seed, ci);
    json entry = {{"name", rule.name}, {"subsample_seed", cohort_seed}};
    Dataset raw;
    std::optional<std::size_t> n = rule.n_samples ? rule.n_samples : default_n;
    if (cfg.data.synthetic) {
      json spec_json = synthetic_spec_to_json(*cfg.data.synthetic);
      spec_json.update(rule.synthetic);
      SyntheticSpec spec = synthetic_spec_from_json(spec_json);
      if (!rule.synthetic.contains("seed") && ci > 0) spec.seed = derive_seed(cfg.data.synthetic->seed, ci);
      raw = generate_synthetic(spec);
      entry["synthetic"] = synthetic_spec_to_json(spec);
    } else {
      raw = *loaded;
      if (rule.filter_column) {
        const auto& col = raw.side_columns.at(*rule.filter_column);
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < col.size(); ++i)
          if (col[i] == rule.filter_value) rows.push_back(static_cast<Eigen::Index>(i));
        if (rows.empty())
          throw Error(ErrorKind::AllSamplesRemoved, "cohort " + rule.name + ": filter matches no rows");
        raw = raw.select_rows(rows);
      }
    }
    if (!raw.labels) throw Error(ErrorKind::MissingColumn, "cohort " + rule.name + ": ground-truth labels required");
    Dataset ds = preprocess_cohort(raw, cfg.preprocess, n, rule.class_ratio, cohort_seed);
    entry["n_samples"] = ds.n_samples();
    entry["n_features"] = ds.n_features();
    entry["n_classes"] = ds.n_classes();
    cohort_manifest.push_back(entry);
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  ExperimentReport report;
  json cohort_manifest = json::array();
  const std::vector<Dataset> cohorts = build_cohorts(cfg, cohort_manifest);

  // One cell per cohort x method; ensembles are filled in after their voters.
  const std::size_t n_methods = cfg.methods.size();
  report.cells.resize(cohorts.size() * n_methods);
  std::vector<std::size_t> jobs;
  for (std::size_t c = 0; c < cohorts.size(); ++c)
    for (std::size_t m = 0; m < n_methods; ++m) {
      CellOutcome& cell = report.cells[c * n_methods + m];
      cell.cohort = cfg.cohorts[c].name;
      cell.method = cfg.methods[m].name;
      cell.seed = cfg.methods[m].seed.value_or(cfg.seed);
      if (cfg.methods[m].kind != MethodKind::Kgg) jobs.push_back(c * n_methods + m);
    }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const std::size_t idx = jobs[j];
      CellOutcome& cell = report.cells[idx];
      const Dataset& ds = cohorts[idx / n_methods];
      const MethodSpec& method = cfg.methods[idx % n_methods];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        cell.result = run_method(method, ds.X, ds.n_classes(), cell.seed, cfg.threads);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cell.seconds = seconds_since(t0);
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t c = 0; c < cohorts.size(); ++c)
    for (std::size_t m = 0; m < n_methods; ++m) {
      const MethodSpec& method = cfg.methods[m];
      if (method.kind != MethodKind::Kgg) continue;
      CellOutcome& cell = report.cells[c * n_methods + m];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        LabelMatrix voters;
        for (const auto& v : method.voters) {
          const auto it = std::find_if(cfg.methods.begin(), cfg.methods.end(),
                                       [&](const MethodSpec& o) { return o.name == v; });
          const CellOutcome& vc = report.cells[c * n_methods + static_cast<std::size_t>(it - cfg.methods.begin())];
          if (!vc.ok) throw Error(ErrorKind::EmptyRuns, "voter " + v + " failed: " + vc.error);
          voters.runs.push_back(vc.result.labels);
          voters.names.push_back(v);
        }
        cell.result.labels = majority_vote(voters);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cell.seconds = seconds_since(t0);
    }

  // Scoring and ranking.
  for (std::size_t c = 0; c < cohorts.size(); ++c)
    for (std::size_t m = 0; m < n_methods; ++m) {
      CellOutcome& cell = report.cells[c * n_methods + m];
      if (!cell.ok) continue;
      auto s = score(cell.method, cell.cohort, *cohorts[c].labels, cell.result.labels);
      s.wall_clock_seconds = cell.seconds;
      report.scores.push_back(s);
    }
  std::vector<ScoreReport> rankable;
  for (const auto& method : cfg.methods) {
    const auto n = std::count_if(report.scores.begin(), report.scores.end(),
                                 [&](const ScoreReport& s) { return s.method == method.name; });
    if (static_cast<std::size_t>(n) != cohorts.size()) report.unranked.push_back(method.name);
  }
  for (const auto& s : report.scores)
    if (std::find(report.unranked.begin(), report.unranked.end(), s.method) == report.unranked.end())
      rankable.push_back(s);
  if (!rankable.empty()) report.ranks = average_rank(rankable);

  // Report files.
  const auto& out = cfg.output_dir;
  std::filesystem::create_directories(out);
  write_scores_csv(out / "scores.csv", report.scores);
  write_ranks_csv(out / "ranks.csv", report.ranks);
  {
    std::ofstream t(out / "timings.csv");
    if (!t) throw Error(ErrorKind::Io, "cannot write " + (out / "timings.csv").string());
    t << "cohort,method,wall_clock_seconds,status\n";
    char buf[64];
    for (const auto& cell : report.cells) {
      std::snprintf(buf, sizeof buf, "%.6f", cell.seconds);
      t << cell.cohort << ',' << cell.method << ',' << buf << ',' << (cell.ok ? "ok" : "failed") << '\n';
    }
  }
  json scores_json = json::array();
  for (const auto& s : report.scores)
    scores_json.push_back({{"method", s.method},
                           {"cohort", s.cohort},
                           {"acc", s.acc},
                           {"ari", s.ari},
                           {"nmi", s.nmi},
                           {"wall_clock_seconds", s.wall_clock_seconds}});
  std::ofstream(out / "scores.json") << scores_json.dump(2) << '\n';

  for (std::size_t c = 0; c < cohorts.size(); ++c) {
    write_labels_csv(out / "truth" / (cfg.cohorts[c].name + ".csv"), *cohorts[c].labels);
    for (std::size_t m = 0; m < n_methods; ++m) {
      const CellOutcome& cell = report.cells[c * n_methods + m];
      if (!cell.ok) continue;
      const auto base = std::filesystem::path(cell.cohort) / cell.method;
      write_labels_csv(out / "labels" / (base.string() + ".csv"), cell.result.labels);
      if (cell.result.embedding) write_matrix_csv(out / "embeddings" / (base.string() + ".csv"), *cell.result.embedding);
      if (!cell.result.pretrain_loss.empty())
        write_loss_csv(out / "losses" / (base.string() + "_pretrain.csv"), cell.result.pretrain_loss);
      if (!cell.result.joint_history.empty())
        write_finetune_csv(out / "losses" / (base.string() + "_finetune.csv"), cell.result.recon_history,
                           cell.result.kl_history, cell.result.joint_history);
      if (cell.result.sweep) {
        std::filesystem::create_directories(out / "sweep" / cell.cohort);
        write_label_matrix(out / "sweep" / (base.string() + ".csv"), cell.result.sweep->labels);
      }
    }
  }

  json& mf = report.manifest;
  mf["tool"] = "tabclust";
  mf["version"] = "1.0.0";
  mf["config"] = cfg.raw;
  mf["config_hash"] = "fnv1a64:" + hex64(fnv1a(cfg.raw.dump()));
  mf["seed"] = cfg.seed;
  mf["epochs_profile"] = to_string(cfg.profile);
  mf["threads"] = cfg.threads;
  mf["cohorts"] = cohort_manifest;
  json methods = json::array();
  for (const auto& m : cfg.methods) {
    json mj = m.resolved_json();
    if (m.uses_autoencoder())
      mj["epochs"] = {{"pretrain", m.deep.train.epochs}, {"finetune", m.deep.finetune_epochs}};
    methods.push_back(mj);
  }
  mf["methods"] = methods;
  json cells = json::array();
  for (const auto& cell : report.cells) {
    json cj = {{"cohort", cell.cohort},
               {"method", cell.method},
               {"status", cell.ok ? "ok" : "failed"},
               {"seed", cell.seed},
               {"wall_clock_seconds", cell.seconds}};
    if (!cell.ok) cj["error"] = cell.error;
    if (cell.result.sweep) {
      json runs = json::array();
      for (const auto& r : cell.result.sweep->runs)
        runs.push_back({{"embed_dim", r.embed_dim}, {"seed", r.seed}, {"wall_clock_seconds", r.seconds}});
      cj["sweep_runs"] = runs;
    }
    cells.push_back(cj);
  }
  mf["cells"] = cells;
  mf["unranked_methods"] = report.unranked;
  mf["excluded_baselines"] = {
      {"methods", {"DEPICT", "DynAE", "DKM", "AE-CM"}},
      {"reason",
       "image-specific designs; the Student-t variants stand in for the DEC/IDEC family and embed_dim = K is "
       "expressible through method params"}};
  mf["total_wall_clock_seconds"] = seconds_since(t_start);
  std::ofstream(out / "manifest.json") << mf.dump(2) << '\n';
  return report;
}

}  // namespace tabclust
