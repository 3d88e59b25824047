// tabclust command-line front end. Exit codes: 0 success, 1 validation error
// (bad flags, config, or input files), 2 runtime failure.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tabclust/data.hpp"
#include "tabclust/ensemble.hpp"
#include "tabclust/experiment.hpp"
#include "tabclust/metrics.hpp"
#include "tabclust/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tabclust;

namespace {

bool is_validation(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::MissingColumn:
    case ErrorKind::NonNumericCell:
    case ErrorKind::EmptyFile:
    case ErrorKind::LengthMismatch:
    case ErrorKind::UnsupportedK:
    case ErrorKind::EmptyRuns:
    case ErrorKind::Io:
    case ErrorKind::InvalidDimension:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::TooFewSamples:
      return true;
    default:
      return false;
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
}

std::vector<std::string> header_columns(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + csv.string());
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorKind::EmptyFile, csv.string());
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::vector<std::string> names;
  std::stringstream ss(header);
  for (std::string name; std::getline(ss, name, ',');) {
    if (name.size() >= 2 && name.front() == '"' && name.back() == '"') name = name.substr(1, name.size() - 2);
    names.push_back(name);
  }
  return names;
}

// Feature specs from a schema file, or every header column except the label.
std::vector<FeatureSpec> specs_for(const std::vector<std::string>& header, const std::string& schema,
                                   const std::string& label) {
  if (!schema.empty()) return load_feature_specs(schema);
  std::vector<FeatureSpec> specs;
  for (const auto& name : header) {
    if (name == label) continue;
    FeatureSpec f;
    f.name = name;
    specs.push_back(f);
  }
  return specs;
}

void print_scores(const ScoreReport& s) {
  std::printf("acc=%.6f ari=%.6f nmi=%.6f\n", s.acc, s.ari, s.nmi);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep and traditional clustering of tabular cohorts"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic two-class cohort as CSV");
  std::string gen_config, gen_out = ".";
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_n, gen_d;
  std::optional<double> gen_sep, gen_ratio, gen_missing;
  std::string gen_shape;
  gen->add_option("--config", gen_config, "Synthetic spec JSON");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output directory (data.csv, schema.json)");
  gen->add_option("--n-samples", gen_n);
  gen->add_option("--n-features", gen_d);
  gen->add_option("--separation", gen_sep);
  gen->add_option("--class-ratio", gen_ratio, "Minority:majority ratio");
  gen->add_option("--missing-rate", gen_missing);
  gen->add_option("--shape", gen_shape)->check(CLI::IsMember({"spherical", "diagonal", "correlated"}));

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Bounds, missing-rate filter, subsample, impute, standardise");
  std::string pre_input, pre_schema, pre_label = "label", pre_out = ".";
  double pre_max_missing = 0.05;
  bool pre_no_bounds = false, pre_no_std = false;
  std::optional<std::size_t> pre_n;
  std::optional<double> pre_ratio;
  std::uint64_t pre_seed = 0;
  pre->add_option("--input", pre_input, "Raw CSV")->required();
  pre->add_option("--schema", pre_schema, "Feature schema JSON")->required();
  pre->add_option("--label-column", pre_label);
  pre->add_option("--max-missing-rate", pre_max_missing)->check(CLI::Range(0.0, 1.0));
  pre->add_flag("--no-bounds", pre_no_bounds);
  pre->add_flag("--no-standardize", pre_no_std);
  pre->add_option("--n-samples", pre_n, "Stratified subsample size");
  pre->add_option("--class-ratio", pre_ratio, "Minority:majority ratio of the subsample");
  pre->add_option("--seed", pre_seed);
  pre->add_option("--out", pre_out, "Output directory (preprocessed.csv)");

  // cluster
  auto* clu = app.add_subcommand("cluster", "Run one method and write its labels");
  std::string clu_input, clu_schema, clu_label = "label", clu_method, clu_params = "{}", clu_config, clu_out = ".";
  std::string clu_profile = "desk";
  int clu_k = 2;
  std::uint64_t clu_seed = 0;
  unsigned clu_threads = 1;
  clu->add_option("--input", clu_input, "Preprocessed CSV")->required();
  clu->add_option("--schema", clu_schema, "Feature schema JSON (default: all non-label columns)");
  clu->add_option("--label-column", clu_label, "Column excluded from the features");
  clu->add_option("--method", clu_method, "Method kind");
  clu->add_option("--params", clu_params, "Method params as inline JSON");
  clu->add_option("--config", clu_config, "Method JSON {name, kind, params}");
  clu->add_option("--k", clu_k)->check(CLI::Range(2, 1000));
  clu->add_option("--seed", clu_seed);
  clu->add_option("--profile", clu_profile)->check(CLI::IsMember({"desk", "paper"}));
  clu->add_option("--threads", clu_threads)->check(CLI::Range(1u, 256u));
  clu->add_option("--out", clu_out, "Output directory (labels.csv, embedding.csv, losses)");

  // ensemble
  auto* ens = app.add_subcommand("ensemble", "Combine binary label files");
  std::vector<std::string> ens_inputs;
  std::string ens_matrix, ens_mode = "majority", ens_out = ".";
  ens->add_option("--inputs", ens_inputs, "Label CSVs (sample_index,label)");
  ens->add_option("--matrix", ens_matrix, "Label matrix CSV, one column per run");
  ens->add_option("--mode", ens_mode)->check(CLI::IsMember({"majority", "dimension"}));
  ens->add_option("--out", ens_out, "Output directory (ensemble.csv)");

  // evaluate
  auto* eva = app.add_subcommand("evaluate", "Score predicted labels against ground truth");
  std::string eva_truth, eva_pred, eva_truth_col = "label", eva_pred_col = "label", eva_out, eva_method = "pred",
                                   eva_cohort = "all";
  eva->add_option("--truth", eva_truth)->required();
  eva->add_option("--pred", eva_pred)->required();
  eva->add_option("--truth-column", eva_truth_col);
  eva->add_option("--pred-column", eva_pred_col);
  eva->add_option("--method", eva_method, "Method name for the scores row");
  eva->add_option("--cohort", eva_cohort, "Cohort name for the scores row");
  eva->add_option("--out", eva_out, "Output directory (scores.csv)");

  // benchmark
  auto* ben = app.add_subcommand("benchmark", "Run the full cohort x method grid");
  std::string ben_config, ben_out, ben_profile;
  std::optional<std::uint64_t> ben_seed;
  std::optional<unsigned> ben_threads;
  ben->add_option("--config", ben_config, "Experiment config JSON")->required();
  ben->add_option("--seed", ben_seed);
  ben->add_option("--out", ben_out, "Output directory (overrides output_dir)");
  ben->add_option("--profile", ben_profile)->check(CLI::IsMember({"desk", "paper"}));
  ben->add_option("--threads", ben_threads)->check(CLI::Range(1u, 256u));

  // rank
  auto* rnk = app.add_subcommand("rank", "Average rank per method over cohorts and metrics");
  std::string rnk_scores, rnk_out;
  rnk->add_option("--scores", rnk_scores, "scores.csv")->required();
  rnk->add_option("--out", rnk_out, "Output directory (ranks.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      json spec_json = gen_config.empty() ? json::object() : read_json(gen_config);
      if (gen_seed) spec_json["seed"] = *gen_seed;
      if (gen_n) spec_json["n_samples"] = *gen_n;
      if (gen_d) spec_json["n_features"] = *gen_d;
      if (gen_sep) spec_json["separation"] = *gen_sep;
      if (gen_ratio) spec_json["class_ratio"] = *gen_ratio;
      if (gen_missing) spec_json["missing_rate"] = *gen_missing;
      if (!gen_shape.empty()) spec_json["cluster_shape"] = gen_shape;
      SyntheticSpec spec;
      try {
        spec = synthetic_spec_from_json(spec_json);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, e.what());
      }
      const Dataset ds = generate_synthetic(spec);
      fs::create_directories(gen_out);
      write_csv(fs::path(gen_out) / "data.csv", ds);
      std::ofstream(fs::path(gen_out) / "schema.json") << feature_specs_to_json(ds.feature_specs).dump(2) << '\n';
      std::printf("wrote %lld samples x %lld features to %s\n", static_cast<long long>(ds.n_samples()),
                  static_cast<long long>(ds.n_features()), (fs::path(gen_out) / "data.csv").c_str());
    } else if (*pre) {
      CsvOptions opts;
      opts.label_column = pre_label;
      Dataset raw = load_csv(pre_input, load_feature_specs(pre_schema), opts);
      PreprocessConfig pc;
      pc.apply_bounds = !pre_no_bounds;
      pc.max_missing_rate = pre_max_missing;
      pc.standardize = !pre_no_std;
      if (pre_n && !raw.labels) throw Error(ErrorKind::InvalidConfig, "--n-samples needs a label column");
      const Dataset ds = preprocess_cohort(raw, pc, pre_n, pre_ratio, pre_seed);
      fs::create_directories(pre_out);
      write_csv(fs::path(pre_out) / "preprocessed.csv", ds, pre_label);
      std::printf("kept %lld of %lld samples\n", static_cast<long long>(ds.n_samples()),
                  static_cast<long long>(raw.n_samples()));
    } else if (*clu) {
      json node;
      if (!clu_config.empty()) {
        node = read_json(clu_config);
      } else {
        if (clu_method.empty()) throw Error(ErrorKind::InvalidConfig, "--method or --config is required");
        json params;
        try {
          params = json::parse(clu_params);
        } catch (const json::parse_error& e) {
          throw Error(ErrorKind::InvalidConfig, std::string("--params: ") + e.what());
        }
        node = {{"name", clu_method}, {"kind", clu_method}, {"params", params}};
      }
      const MethodSpec method = parse_method(node, profile_from_string(clu_profile), "method");
      if (method.kind == MethodKind::Kgg)
        throw Error(ErrorKind::InvalidConfig, "kgg combines label files; use the ensemble subcommand");
      CsvOptions opts;
      const auto header = header_columns(clu_input);
      if (std::find(header.begin(), header.end(), clu_label) != header.end()) opts.label_column = clu_label;
      const Dataset ds = load_csv(clu_input, specs_for(header, clu_schema, clu_label), opts);
      if (ds.missing_count() > 0)
        throw Error(ErrorKind::InvalidConfig, "input has missing values; run preprocess first");
      const MethodResult r = run_method(method, ds.X, clu_k, method.seed.value_or(clu_seed), clu_threads);
      const fs::path out = clu_out;
      write_labels_csv(out / "labels.csv", r.labels);
      if (r.embedding) write_matrix_csv(out / "embedding.csv", *r.embedding);
      if (!r.pretrain_loss.empty()) write_loss_csv(out / "pretrain_loss.csv", r.pretrain_loss);
      if (!r.joint_history.empty())
        write_finetune_csv(out / "finetune_loss.csv", r.recon_history, r.kl_history, r.joint_history);
      if (r.sweep) write_label_matrix(out / "sweep_labels.csv", r.sweep->labels);
      std::printf("wrote %zu labels to %s\n", r.labels.size(), (out / "labels.csv").c_str());
    } else if (*ens) {
      LabelMatrix m;
      if (!ens_matrix.empty()) {
        if (!ens_inputs.empty()) throw Error(ErrorKind::InvalidConfig, "give --inputs or --matrix, not both");
        m = read_label_matrix(ens_matrix);
      } else {
        if (ens_inputs.empty()) throw Error(ErrorKind::InvalidConfig, "--inputs or --matrix is required");
        for (const auto& path : ens_inputs) {
          m.runs.push_back(read_labels_csv(path));
          m.names.push_back(path);
        }
      }
      const Labels labels = ens_mode == "majority" ? majority_vote(m) : dimension_ensemble(m);
      write_labels_csv(fs::path(ens_out) / "ensemble.csv", labels);
      std::printf("combined %zu runs of %zu samples\n", m.runs.size(), m.n_samples());
    } else if (*eva) {
      const Labels truth = read_labels_csv(eva_truth, eva_truth_col);
      const Labels pred = read_labels_csv(eva_pred, eva_pred_col);
      const ScoreReport s = score(eva_method, eva_cohort, truth, pred);
      print_scores(s);
      if (!eva_out.empty()) write_scores_csv(fs::path(eva_out) / "scores.csv", {s});
    } else if (*ben) {
      json raw = read_json(ben_config);
      if (!raw.is_object()) throw Error(ErrorKind::InvalidConfig, "config: expected a JSON object");
      if (ben_seed) raw["seed"] = *ben_seed;
      if (!ben_out.empty()) raw["output_dir"] = ben_out;
      if (!ben_profile.empty()) raw["epochs_profile"] = ben_profile;
      if (ben_threads) raw["threads"] = *ben_threads;
      const ExperimentConfig cfg = parse_experiment_config(raw, fs::path(ben_config).parent_path());
      const ExperimentReport report = run_experiment(cfg);
      std::printf("%-24s %-12s %8s %8s %8s %10s\n", "method", "cohort", "acc", "ari", "nmi", "seconds");
      for (const auto& s : report.scores)
        std::printf("%-24s %-12s %8.4f %8.4f %8.4f %10.2f\n", s.method.c_str(), s.cohort.c_str(), s.acc, s.ari,
                    s.nmi, s.wall_clock_seconds);
      int failed = 0;
      for (const auto& cell : report.cells)
        if (!cell.ok) {
          ++failed;
          std::fprintf(stderr, "failed: %s / %s: %s\n", cell.cohort.c_str(), cell.method.c_str(), cell.error.c_str());
        }
      std::printf("reports in %s\n", cfg.output_dir.c_str());
      if (failed > 0) return 2;
    } else if (*rnk) {
      const auto ranks = average_rank(read_scores_csv(rnk_scores));
      std::printf("%-24s %10s %10s %6s\n", "method", "mean_rank", "std_rank", "cells");
      for (const auto& r : ranks)
        std::printf("%-24s %10.4f %10.4f %6zu\n", r.method.c_str(), r.mean_rank, r.std_rank, r.cells);
      if (!rnk_out.empty()) write_ranks_csv(fs::path(rnk_out) / "ranks.csv", ranks);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_validation(e.kind()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
