#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tabclust/common.hpp"
#include "tabclust/metrics.hpp"

namespace tabclust {

// Fixed CSV layouts:
//   labels     sample_index,label
//   scores     method,cohort,acc,ari,nmi
//   timings    cohort,method,wall_clock_seconds,status
//   ranks      method,mean_rank,std_rank,cells
//   pretrain   epoch,loss
//   finetune   epoch,recon_loss,kl_loss,joint_loss
//   embedding  z0,...,z{d-1}

void write_labels_csv(const std::filesystem::path& path, const Labels& labels);
// Reads the named column (default "label") from any CSV with a header row.
Labels read_labels_csv(const std::filesystem::path& path, const std::string& column = "label");

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoreReport>& scores);
std::vector<ScoreReport> read_scores_csv(const std::filesystem::path& path);
void write_ranks_csv(const std::filesystem::path& path, const std::vector<RankSummary>& ranks);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::string& prefix = "z");
void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& loss);
void write_finetune_csv(const std::filesystem::path& path, const std::vector<double>& recon,
                        const std::vector<double>& kl, const std::vector<double>& joint);

// 64-bit FNV-1a, used for the config hash in run manifests.
std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t v);

}  // namespace tabclust
