#include "eclab/telemetry.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eclab::harness {

namespace {

const std::array<std::string, 13> kColumns = {
    "step",          "entropy_exact",     "entropy_sampled",  "reward_mean",
    "reward_pop_std", "r_std_gate",       "gate_open_frac",   "selfinfo_pos_mean",
    "kl_mean",       "prob_numeric_mean", "prob_other_mean",  "high_entropy_count",
    "eval_score"};

}  // namespace

std::span<const std::string> csv_columns() { return kColumns; }

std::string format_g17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i) h += ',';
    h += kColumns[i];
  }
  h += '\n';
  return h;
}

std::string csv_row(const StepRecord& r) {
  const double cells[13] = {static_cast<double>(r.step),
                            r.entropy_exact,
                            r.entropy_sampled,
                            r.reward_mean,
                            r.reward_pop_std,
                            r.r_std_gate,
                            r.gate_open_frac,
                            r.selfinfo_pos_mean,
                            r.kl_mean,
                            r.prob_numeric_mean,
                            r.prob_other_mean,
                            r.high_entropy_count,
                            r.eval_score};
  std::string out;
  for (int i = 0; i < 13; ++i) {
    if (i) out += ',';
    out += format_g17(cells[i]);
  }
  out += '\n';
  return out;
}

void write_csv(const std::filesystem::path& path, std::span<const StepRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << csv_header();
  for (const StepRecord& r : records) out << csv_row(r);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<double> Telemetry::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) {
      std::vector<double> v(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) v[r] = rows[r][c];
      return v;
    }
  }
  throw std::runtime_error("telemetry: missing column '" + name + "'");
}

Telemetry read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("telemetry: empty file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();

  Telemetry t;
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) t.columns.push_back(cell);
  for (const std::string& want : kColumns) {
    bool found = false;
    for (const std::string& have : t.columns)
      if (have == want) found = true;
    if (!found)
      throw std::runtime_error("telemetry: missing column '" + want + "' in " + path.string());
  }

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(t.columns.size());
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != t.columns.size())
      throw std::runtime_error("telemetry: ragged row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace eclab::harness
