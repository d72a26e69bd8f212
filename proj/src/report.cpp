#include "ofp/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace ofp {

namespace fs = std::filesystem;

bool Report::all_passed() const {
  return std::all_of(verifications.begin(), verifications.end(),
                     [](const Verification& v) { return v.passed; });
}

Json to_json(const Report& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) cells.push_back({{"nfe", c.nfe}, {"warm", c.warm}, {"metrics", c.metrics}});
  Json ver = Json::array();
  for (const auto& v : r.verifications) ver.push_back(to_json(v));
  return Json{{"run_id", r.run_id},         {"config_hash", r.config_hash}, {"seed", r.seed},
              {"checkpoint", r.checkpoint}, {"metrics", r.metrics},         {"cells", cells},
              {"verifications", ver}};
}

Report report_from_json(const Json& j) {
  Report r;
  r.run_id = j.at("run_id").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  for (const auto& c : j.at("cells")) {
    r.cells.push_back(ReportCell{c.at("nfe").get<int>(), c.at("warm").get<bool>(),
                                 c.at("metrics").get<std::map<std::string, double>>()});
  }
  for (const auto& v : j.at("verifications")) r.verifications.push_back(verification_from_json(v));
  return r;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_csv(const Report& r) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& [k, v] : r.metrics) out += "metric," + k + ",,," + k + "," + num(v) + "\n";
  for (const auto& c : r.cells) {
    const std::string prefix =
        "cell,nfe" + std::to_string(c.nfe) + (c.warm ? "_warm" : "_cold") + "," +
        std::to_string(c.nfe) + "," + (c.warm ? "on" : "off") + ",";
    for (const auto& [k, v] : c.metrics) out += prefix + k + "," + num(v) + "\n";
  }
  for (const auto& v : r.verifications) {
    out += "verification," + v.name + ",,,measured," + num(v.measured) + "\n";
    out += "verification," + v.name + ",,,threshold," + num(v.threshold) + "\n";
    out += "verification," + v.name + ",,,passed," + (v.passed ? "1" : "0") + "\n";
  }
  return out;
}

std::string scatter_svg(const Scatter& s, int size) {
  double lo = -1.0, hi = 1.0;
  auto widen = [&](const std::vector<std::array<double, 2>>& pts) {
    for (const auto& p : pts) {
      for (double v : p) {
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
  };
  widen(s.generated);
  widen(s.expert);
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto px = [&](double v) { return (v - lo) / (hi - lo) * size; };

  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                size, size, size, size);
  out += buf;
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto points = [&](const std::vector<std::array<double, 2>>& pts, const char* cls, const char* color) {
    out += std::string("<g class=\"") + cls + "\" fill=\"" + color + "\" fill-opacity=\"0.5\">\n";
    for (const auto& p : pts) {
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.5\"/>\n", px(p[0]),
                    size - px(p[1]));
      out += buf;
    }
    out += "</g>\n";
  };
  points(s.expert, "expert", "#1f77b4");
  points(s.generated, "generated", "#d62728");
  out += "</svg>\n";
  return out;
}

void emit_report(const fs::path& dir, const Report& r, const Scatter* scatter) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string());
  std::ofstream j(dir / "report.json", std::ios::trunc);
  j << to_json(r).dump(2) << "\n";
  std::ofstream c(dir / "report.csv", std::ios::binary | std::ios::trunc);
  c << report_csv(r);
  if (!j || !c) throw std::runtime_error("cannot write report files in " + dir.string());
  if (scatter) {
    std::ofstream s(dir / "scatter.svg", std::ios::trunc);
    s << scatter_svg(*scatter);
    if (!s) throw std::runtime_error("cannot write scatter.svg in " + dir.string());
  }
}

}  // namespace ofp
