#include "dsr/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dsr/error.hpp"

namespace dsr {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_metrics(const std::string& path, const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrCode::IoError, "cannot open " + path + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    require(row.size() == header.size(), ErrCode::DimensionMismatch,
            "csv row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  require(out.good(), ErrCode::IoError, "write failed for " + path);
}

CsvContent read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrCode::IoError, "cannot open " + path);
  CsvContent content;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (first) {
      content.header = std::move(cells);
      first = false;
    } else {
      content.rows.push_back(std::move(cells));
    }
  }
  return content;
}

void write_training_csv(const std::string& path, const std::vector<EpisodeRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const EpisodeRow& r : rows)
    cells.push_back({std::to_string(r.episode), std::to_string(r.steps), format_double(r.reward),
                     format_double(r.eps), format_double(r.loss_r), format_double(r.loss_a),
                     format_double(r.loss_m)});
  write_metrics(path, {"episode", "steps", "reward", "eps", "loss_r", "loss_a", "loss_m"}, cells);
}

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const EvalRow& r : rows)
    cells.push_back({std::to_string(r.episode), std::to_string(r.env_steps),
                     format_double(r.mean_reward), format_double(r.std_reward)});
  write_metrics(path, {"episode", "env_steps", "mean_reward", "std_reward"}, cells);
}

void write_distal_csv(const std::string& path, const DistalResult& result) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(result.rows.size());
  for (const DistalRow& r : result.rows)
    cells.push_back({std::to_string(r.updates), std::to_string(r.env_steps),
                     format_double(r.q_start), format_double(result.target_q),
                     format_double(r.loss_r)});
  write_metrics(path, {"updates", "env_steps", "q_start", "target_q", "loss_r"}, cells);
}

void write_subgoals_csv(const std::string& path, const std::vector<SubgoalCandidate>& ranked) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(ranked.size());
  for (const SubgoalCandidate& c : ranked)
    cells.push_back({std::to_string(c.state_id), std::to_string(c.cell.row),
                     std::to_string(c.cell.col), std::to_string(c.boundary_count),
                     std::to_string(c.rank)});
  write_metrics(path, {"state_id", "row", "col", "boundary_count", "rank"}, cells);
}

void write_sr_csv(const std::string& path, const SRTable& table) {
  std::vector<std::vector<std::string>> cells;
  for (int s = 0; s < table.n_states; ++s)
    for (int a = 0; a < kNumActions; ++a) {
      std::vector<std::string> row{std::to_string(s), std::to_string(a)};
      for (int sp = 0; sp < table.n_states; ++sp)
        row.push_back(format_double(table.at(s, a, sp)));
      cells.push_back(std::move(row));
    }
  std::vector<std::string> header{"state", "action"};
  for (int sp = 0; sp < table.n_states; ++sp) header.push_back("m" + std::to_string(sp));
  write_metrics(path, header, cells);
}

}  // namespace dsr
