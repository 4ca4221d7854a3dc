#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ersc {

inline constexpr const char* kVersion = "0.1.0";

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column, or -1.
  int column(const std::string& col) const;
};

struct RunReport {
  std::string command;
  std::string config_digest;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  int workers = 1;
  nlohmann::json results = nlohmann::json::object();
  nlohmann::json wall_times = nlohmann::json::object();
  std::vector<Table> tables;
  std::vector<std::string> notices;
  // Set when a verification command found a failed check.
  bool check_failed = false;

  const Table* table(const std::string& name) const;
  nlohmann::json to_json() const;
};

void write_table_csv(const Table& table, const std::filesystem::path& path);

/// Writes report.json and one CSV per table (wall-times go only into the JSON).
std::vector<std::filesystem::path> write_report(const RunReport& report,
                                                const std::filesystem::path& dir,
                                                const std::vector<std::string>& formats);

/// Two-column plot files: value-vs-epsilon, value-vs-kappa, rho-vs-l, MEM shells.
/// Series absent from the report are skipped with a notice appended to `notices`.
std::vector<std::filesystem::path> emit_plot_data(const RunReport& report,
                                                  const std::filesystem::path& dir,
                                                  std::vector<std::string>* notices = nullptr);

}  // namespace ersc
