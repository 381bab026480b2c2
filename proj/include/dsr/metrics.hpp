#pragma once

#include <string>
#include <vector>

#include "dsr/agent.hpp"
#include "dsr/subgoals.hpp"
#include "dsr/tabular.hpp"

namespace dsr {

/// Locale-independent shortest round-trip formatting.
std::string format_double(double v);

/// CSV with a header row, one record per line, newline-terminated. Every row
/// must match the header width.
void write_metrics(const std::string& path, const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows);

struct CsvContent {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvContent read_csv(const std::string& path);

/// Fixed schemas per experiment type.
void write_training_csv(const std::string& path, const std::vector<EpisodeRow>& rows);
void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows);
void write_distal_csv(const std::string& path, const DistalResult& result);
void write_subgoals_csv(const std::string& path, const std::vector<SubgoalCandidate>& ranked);
void write_sr_csv(const std::string& path, const SRTable& table);

}  // namespace dsr
