#include "ersc/report.hpp"

#include "ersc/csv.hpp"
#include "ersc/types.hpp"

#include <algorithm>
#include <fstream>

namespace ersc {

namespace fs = std::filesystem;

int Table::column(const std::string& col) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == col) return static_cast<int>(i);
  return -1;
}

const Table* RunReport::table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config_digest"] = config_digest;
  j["version"] = version;
  j["seed"] = seed;
  j["workers"] = workers;
  j["results"] = results;
  j["wall_times"] = wall_times;
  j["notices"] = notices;
  nlohmann::json names = nlohmann::json::array();
  for (const auto& t : tables) names.push_back(t.name);
  j["tables"] = names;
  return j;
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

}  // namespace

void write_table_csv(const Table& table, const fs::path& path) {
  std::ofstream os = open_out(path);
  CsvWriter csv(os);
  csv.header(table.header);
  for (const auto& r : table.rows) csv.row(r);
  if (!os) throw IoError("write failed for " + path.string());
}

std::vector<fs::path> write_report(const RunReport& report, const fs::path& dir,
                                   const std::vector<std::string>& formats) {
  ensure_dir(dir);
  std::vector<fs::path> written;
  const auto wants = [&](const char* f) {
    return std::find(formats.begin(), formats.end(), f) != formats.end();
  };
  if (wants("csv")) {
    for (const auto& t : report.tables) {
      const fs::path p = dir / (t.name + ".csv");
      write_table_csv(t, p);
      written.push_back(p);
    }
  }
  if (wants("json")) {
    const fs::path p = dir / "report.json";
    std::ofstream os = open_out(p);
    os << report.to_json().dump(2) << '\n';
    if (!os) throw IoError("write failed for " + p.string());
    written.push_back(p);
  }
  return written;
}

std::vector<fs::path> emit_plot_data(const RunReport& report, const fs::path& dir,
                                     std::vector<std::string>* notices) {
  struct PlotSpec {
    const char* series;
    const char* file;
    std::vector<std::string> columns;
  };
  const std::vector<PlotSpec> specs = {
      {"epsilon_sweep", "plot_epsilon.csv", {"epsilon", "lambda_sm"}},
      {"kappa_sweep", "plot_kappa.csv", {"kappa", "lambda_kappa", "lambda_zero_gap"}},
      {"game_sweep", "plot_game.csv", {"l", "rho"}},
      {"mem_shells", "plot_mem.csv", {"radius", "mass_beyond"}},
  };
  std::vector<fs::path> written;
  bool dir_ready = false;
  for (const auto& spec : specs) {
    const Table* t = report.table(spec.series);
    if (!t) {
      if (notices) notices->push_back(std::string("plot series '") + spec.series + "' not in report; skipped");
      continue;
    }
    std::vector<int> idx;
    for (const auto& c : spec.columns) idx.push_back(t->column(c));
    if (std::find(idx.begin(), idx.end(), -1) != idx.end()) {
      if (notices) notices->push_back(std::string("plot series '") + spec.series + "' lacks a column; skipped");
      continue;
    }
    if (!dir_ready) {
      ensure_dir(dir);
      dir_ready = true;
    }
    Table out;
    out.name = spec.series;
    out.header = spec.columns;
    for (const auto& r : t->rows) {
      std::vector<double> row;
      for (const int i : idx) row.push_back(r[static_cast<std::size_t>(i)]);
      out.rows.push_back(std::move(row));
    }
    const fs::path p = dir / spec.file;
    write_table_csv(out, p);
    written.push_back(p);
  }
  return written;
}

}  // namespace ersc
