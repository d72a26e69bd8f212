#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ofp/json_util.hpp"
#include "ofp/verify.hpp"

namespace ofp {

struct ReportCell {
  int nfe = 0;
  bool warm = false;
  std::map<std::string, double> metrics;
};

struct Report {
  std::string run_id;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string checkpoint;
  std::map<std::string, double> metrics;
  std::vector<ReportCell> cells;
  std::vector<Verification> verifications;

  bool all_passed() const;
};

Json to_json(const Report& r);
Report report_from_json(const Json& j);

struct Scatter {
  std::vector<std::array<double, 2>> generated;
  std::vector<std::array<double, 2>> expert;
};

// Column order of report.csv.
inline constexpr const char* kReportCsvHeader = "kind,name,nfe,warm,metric,value";

std::string report_csv(const Report& r);
std::string scatter_svg(const Scatter& s, int size = 480);

// Writes report.json and report.csv, plus scatter.svg when `scatter` is given.
void emit_report(const std::filesystem::path& dir, const Report& r, const Scatter* scatter = nullptr);

}  // namespace ofp
