#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gkdv/errors.hpp"
#include "gkdv/version.hpp"
#include "json.hpp"

namespace gkdv {

// Full-precision float formatting shared by CSV payloads and scalar echoes;
// parses back to the identical double.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ScalarEntry {
  std::string operation; // the operation that produced the value
  double value = 0.0;
};

// Run manifest written next to the CSV payloads. Deliberately timestamp-free:
// re-running the same config must reproduce the file byte for byte.
struct RunReport {
  std::string subcommand;
  std::string status = "ok";
  std::map<std::string, std::string> config; // resolved key/value echo
  std::map<std::string, ScalarEntry> scalars;
  std::vector<std::string> csv_paths;
  nlohmann::json payload = nlohmann::json::object(); // subcommand-specific detail

  void put_scalar(const std::string& name, const std::string& operation, double value) {
    scalars[name] = {operation, value};
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["version"] = version_string;
    j["subcommand"] = subcommand;
    j["status"] = status;
    j["config"] = nlohmann::json::object();
    for (const auto& [key, val] : config) j["config"][key] = val;
    j["scalars"] = nlohmann::json::object();
    for (const auto& [name, entry] : scalars)
      j["scalars"][name] = {{"operation", entry.operation}, {"value", entry.value}};
    j["csv"] = csv_paths;
    j["payload"] = payload;
    return j;
  }

  void write(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw domain_error("report: cannot open " + path);
    f << to_json().dump(2) << '\n';
    if (!f) throw domain_error("report: write failed for " + path);
  }
};

// Shape check for emitted reports: field presence and types, not values.
inline void validate_report(const nlohmann::json& j) {
  if (!j.is_object()) throw domain_error("report: not an object");
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw domain_error(std::string("report: missing field ") + key);
    return j.at(key);
  };
  if (!need("version").is_string()) throw domain_error("report: version must be a string");
  if (!need("subcommand").is_string())
    throw domain_error("report: subcommand must be a string");
  const auto& status = need("status");
  if (!status.is_string() || (status != "ok" && status != "error"))
    throw domain_error("report: status must be \"ok\" or \"error\"");
  const auto& config = need("config");
  if (!config.is_object()) throw domain_error("report: config must be an object");
  for (const auto& [key, val] : config.items())
    if (!val.is_string())
      throw domain_error("report: config value " + key + " must be a string");
  const auto& scalars = need("scalars");
  if (!scalars.is_object()) throw domain_error("report: scalars must be an object");
  for (const auto& [name, entry] : scalars.items()) {
    if (!entry.is_object() || !entry.contains("operation") || !entry.contains("value") ||
        !entry.at("operation").is_string() || !entry.at("value").is_number())
      throw domain_error("report: scalar " + name +
                         " must carry a producing operation and a numeric value");
  }
  const auto& csv = need("csv");
  if (!csv.is_array()) throw domain_error("report: csv must be an array");
  for (const auto& p : csv)
    if (!p.is_string()) throw domain_error("report: csv entries must be strings");
  if (!need("payload").is_object()) throw domain_error("report: payload must be an object");
}

// Plain CSV with a header row, full-precision values, newline endings.
inline void write_csv(const std::string& path, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  if (columns.empty()) throw domain_error("write_csv: need at least one column");
  std::ofstream f(path);
  if (!f) throw domain_error("write_csv: cannot open " + path);
  for (size_t c = 0; c < columns.size(); ++c)
    f << (c ? "," : "") << columns[c];
  f << '\n';
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw domain_error("write_csv: row width does not match the header");
    for (size_t c = 0; c < row.size(); ++c)
      f << (c ? "," : "") << format_full(row[c]);
    f << '\n';
  }
  if (!f) throw domain_error("write_csv: write failed for " + path);
}

} // namespace gkdv
