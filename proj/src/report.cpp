#include "tabclust/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tabclust {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string precise(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& cell, const std::filesystem::path& path, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::NonNumericCell, path.string() + " row " + std::to_string(row) + ": '" + cell + "'");
  }
}

}  // namespace

void write_labels_csv(const std::filesystem::path& path, const Labels& labels) {
  auto out = open_out(path);
  out << "sample_index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

Labels read_labels_csv(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyFile, path.string());
  const auto header = split(line);
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw Error(ErrorKind::MissingColumn, column + " in " + path.string());
  const auto col = static_cast<std::size_t>(it - header.begin());
  Labels labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (col >= cells.size()) throw Error(ErrorKind::MissingColumn, column + " in row " + std::to_string(row));
    const double v = to_double(cells[col], path, row);
    if (v != static_cast<int>(v) || v < 0)
      throw Error(ErrorKind::NonNumericCell, path.string() + " row " + std::to_string(row) + ": not a label");
    labels.push_back(static_cast<int>(v));
    ++row;
  }
  if (labels.empty()) throw Error(ErrorKind::EmptyFile, path.string());
  return labels;
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoreReport>& scores) {
  auto out = open_out(path);
  out << "method,cohort,acc,ari,nmi\n";
  for (const auto& s : scores)
    out << s.method << ',' << s.cohort << ',' << fixed(s.acc, 6) << ',' << fixed(s.ari, 6) << ','
        << fixed(s.nmi, 6) << '\n';
}

std::vector<ScoreReport> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::EmptyFile, path.string());
  const auto header = split(line);
  auto find = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::MissingColumn, name + " in " + path.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_method = find("method"), c_cohort = find("cohort"), c_acc = find("acc"),
                    c_ari = find("ari"), c_nmi = find("nmi");
  const auto wall = std::find(header.begin(), header.end(), "wall_clock_seconds");
  std::vector<ScoreReport> scores;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() < header.size()) throw Error(ErrorKind::LengthMismatch, "row " + std::to_string(row));
    ScoreReport s;
    s.method = cells[c_method];
    s.cohort = cells[c_cohort];
    s.acc = to_double(cells[c_acc], path, row);
    s.ari = to_double(cells[c_ari], path, row);
    s.nmi = to_double(cells[c_nmi], path, row);
    if (wall != header.end())
      s.wall_clock_seconds = to_double(cells[static_cast<std::size_t>(wall - header.begin())], path, row);
    scores.push_back(std::move(s));
    ++row;
  }
  return scores;
}

void write_ranks_csv(const std::filesystem::path& path, const std::vector<RankSummary>& ranks) {
  auto out = open_out(path);
  out << "method,mean_rank,std_rank,cells\n";
  for (const auto& r : ranks)
    out << r.method << ',' << fixed(r.mean_rank, 4) << ',' << fixed(r.std_rank, 4) << ',' << r.cells << '\n';
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::string& prefix) {
  auto out = open_out(path);
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << prefix << j;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << precise(m(i, j));
    out << '\n';
  }
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& loss) {
  auto out = open_out(path);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < loss.size(); ++e) out << e + 1 << ',' << precise(loss[e]) << '\n';
}

void write_finetune_csv(const std::filesystem::path& path, const std::vector<double>& recon,
                        const std::vector<double>& kl, const std::vector<double>& joint) {
  auto out = open_out(path);
  out << "epoch,recon_loss,kl_loss,joint_loss\n";
  for (std::size_t e = 0; e < joint.size(); ++e)
    out << e + 1 << ',' << precise(recon[e]) << ',' << precise(kl[e]) << ',' << precise(joint[e]) << '\n';
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace tabclust
