#include "homopt/records.hpp"

#include <fstream>

#include "homopt/errors.hpp"
#include "json.hpp"

namespace homopt::records {

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
  if (!arr.is_array()) throw SchemaMismatch("expected a JSON array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

}  // namespace

std::string to_json_line(const homotopy::SolutionRecord& record) {
  nlohmann::json obj;
  obj["problem"] = record.problem;
  obj["s0"] = vector_to_json(record.s0);
  obj["z"] = vector_to_json(record.z);
  obj["alpha"] = record.params.alpha;
  obj["beta"] = record.params.beta;
  obj["residual_norm"] = record.residual_norm;
  return obj.dump();
}

homotopy::SolutionRecord from_json_line(const std::string& line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("bad record line: ") + e.what());
  }
  if (!obj.contains("problem") || !obj.contains("s0") || !obj.contains("z") ||
      !obj.contains("alpha") || !obj.contains("beta") ||
      !obj.contains("residual_norm"))
    throw SchemaMismatch("record line missing required keys");

  homotopy::SolutionRecord record;
  record.problem = obj["problem"].get<std::string>();
  record.s0 = vector_from_json(obj["s0"]);
  record.z = vector_from_json(obj["z"]);
  record.params.alpha = obj["alpha"].get<double>();
  record.params.beta = obj["beta"].get<double>();
  record.residual_norm = obj["residual_norm"].get<double>();
  return record;
}

void save_jsonl(const std::string& path,
                const std::vector<homotopy::SolutionRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  for (const auto& record : records) out << to_json_line(record) << '\n';
  if (!out) throw IOFailure("write failed: " + path);
}

std::vector<homotopy::SolutionRecord> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open for reading: " + path);
  std::vector<homotopy::SolutionRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(from_json_line(line));
  }
  return records;
}

}  // namespace homopt::records
