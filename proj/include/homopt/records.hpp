#pragma once

// Converged-solution persistence: one JSON object per line with keys
// {s0, z, alpha, beta, residual_norm, problem}.

#include <string>
#include <vector>

#include "homopt/homotopy.hpp"

namespace homopt::records {

std::string to_json_line(const homotopy::SolutionRecord& record);
homotopy::SolutionRecord from_json_line(const std::string& line);

void save_jsonl(const std::string& path,
                const std::vector<homotopy::SolutionRecord>& records);
std::vector<homotopy::SolutionRecord> load_jsonl(const std::string& path);

}  // namespace homopt::records
