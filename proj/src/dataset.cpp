#include "ofp/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ofp {

namespace fs = std::filesystem;

ActionNormalizer ActionNormalizer::identity(int action_dim) {
  return {std::vector<double>(static_cast<std::size_t>(action_dim), -1.0),
          std::vector<double>(static_cast<std::size_t>(action_dim), 1.0)};
}

ActionNormalizer ActionNormalizer::fit(const std::vector<Chunk>& chunks, int action_dim) {
  const auto d = static_cast<std::size_t>(action_dim);
  ActionNormalizer n{std::vector<double>(d, std::numeric_limits<double>::infinity()),
                     std::vector<double>(d, -std::numeric_limits<double>::infinity())};
  for (const Chunk& c : chunks) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      n.low[i % d] = std::min(n.low[i % d], c[i]);
      n.high[i % d] = std::max(n.high[i % d], c[i]);
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    if (!(n.high[k] > n.low[k])) {
      const double mid = std::isfinite(n.low[k]) ? n.low[k] : 0.0;
      n.low[k] = mid - 1.0;
      n.high[k] = mid + 1.0;
    }
  }
  return n;
}

Chunk ActionNormalizer::apply(const Chunk& raw) const {
  const std::size_t d = low.size();
  Chunk out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = 2.0 * (raw[i] - low[i % d]) / (high[i % d] - low[i % d]) - 1.0;
  }
  return out;
}

Chunk ActionNormalizer::invert(const Chunk& normalized) const {
  const std::size_t d = low.size();
  Chunk out(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    out[i] = low[i % d] + 0.5 * (normalized[i] + 1.0) * (high[i % d] - low[i % d]);
  }
  return out;
}

Json to_json(const ActionNormalizer& n) { return Json{{"low", n.low}, {"high", n.high}}; }

ActionNormalizer action_normalizer_from_json(const Json& j, const std::string& path) {
  ActionNormalizer n;
  JsonReader r(j, path);
  r.get("low", n.low);
  r.get("high", n.high);
  r.finish();
  if (n.low.empty() || n.low.size() != n.high.size()) {
    throw ConfigError(path, "low/high must be nonempty and of equal length");
  }
  for (std::size_t k = 0; k < n.low.size(); ++k) {
    if (!(n.high[k] > n.low[k])) throw ConfigError(path, "high must exceed low");
  }
  return n;
}

void Dataset::validate() const {
  if (chunks.empty()) throw std::invalid_argument("dataset is empty");
  if (obs.size() != chunks.size() || demo.size() != chunks.size()) {
    throw std::invalid_argument("dataset columns have different lengths");
  }
  if (normalizer.low.size() != static_cast<std::size_t>(action_dim)) {
    throw std::invalid_argument("normalizer does not match action_dim");
  }
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (obs[i].size() != static_cast<std::size_t>(obs_dim) ||
        chunks[i].size() != static_cast<std::size_t>(chunk_dim())) {
      throw std::invalid_argument("dataset row " + std::to_string(i) + " has wrong width");
    }
  }
}

Dataset make_gmm_dataset(const GmmTaskSpec& spec, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("make_gmm_dataset: n must be >= 1");
  spec.validate();
  Dataset ds;
  ds.task = "gmm";
  ds.obs_dim = spec.obs_dim;
  ds.action_dim = spec.action_dim;
  ds.horizon = spec.horizon;
  ds.seed = seed;
  ds.n_demos = n;
  ds.normalizer = ActionNormalizer::identity(spec.action_dim);
  Rng rng(seed, 0xda7a);
  for (int i = 0; i < n; ++i) {
    ds.obs.push_back(gmm_sample_obs(spec, rng));
    ds.chunks.push_back(gmm_expert_sample(spec, ds.obs.back(), rng));
    ds.demo.push_back(i);
  }
  return ds;
}

Dataset make_point_mass_dataset(const PointMassConfig& c, int n_demos, std::uint64_t seed) {
  if (n_demos < 1) throw std::invalid_argument("make_point_mass_dataset: n_demos must be >= 1");
  c.validate();
  Dataset ds;
  ds.task = "point_mass";
  ds.obs_dim = PointMassConfig::kObsDim;
  ds.action_dim = PointMassConfig::kActionDim;
  ds.horizon = c.horizon;
  ds.seed = seed;
  ds.n_demos = n_demos;
  const Rng root(seed, 0xde70);
  for (int k = 0; k < n_demos; ++k) {
    Rng rng = root.split(static_cast<std::uint64_t>(k));
    Demonstration d = record_demonstration(c, rng);
    for (std::size_t i = 0; i < d.chunks.size(); ++i) {
      ds.demo.push_back(k);
      ds.obs.push_back(std::move(d.obs[i]));
      ds.chunks.push_back(std::move(d.chunks[i]));
    }
  }
  ds.normalizer = ActionNormalizer::fit(ds.chunks, ds.action_dim);
  return ds;
}

namespace {

void append_number(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += buf;
}

}  // namespace

void save_dataset(const fs::path& dir, const Dataset& ds) {
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string());

  Json meta = {{"task", ds.task},           {"obs_dim", ds.obs_dim},
               {"action_dim", ds.action_dim}, {"horizon", ds.horizon},
               {"n", ds.size()},             {"n_demos", ds.n_demos},
               {"seed", ds.seed},            {"normalization", to_json(ds.normalizer)}};
  std::ofstream m(dir / "metadata.json", std::ios::trunc);
  m << meta.dump(2) << "\n";

  std::string out = "demo";
  for (int i = 0; i < ds.obs_dim; ++i) out += ",o_" + std::to_string(i);
  for (int i = 0; i < ds.chunk_dim(); ++i) out += ",a_" + std::to_string(i);
  out += "\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out += std::to_string(ds.demo[r]);
    for (double v : ds.obs[r]) {
      out += ',';
      append_number(out, v);
    }
    for (double v : ds.chunks[r]) {
      out += ',';
      append_number(out, v);
    }
    out += '\n';
  }
  std::ofstream csv(dir / "data.csv", std::ios::binary | std::ios::trunc);
  csv << out;
  if (!m || !csv) throw std::runtime_error("write failed in " + dir.string());
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream m(dir / "metadata.json");
  if (!m) throw std::runtime_error("cannot open " + (dir / "metadata.json").string());
  Json meta;
  try {
    meta = Json::parse(m);
  } catch (const Json::exception& e) {
    throw ConfigError("metadata", e.what());
  }
  Dataset ds;
  std::size_t n = 0;
  JsonReader r(meta, "metadata");
  r.get("task", ds.task);
  r.get("obs_dim", ds.obs_dim);
  r.get("action_dim", ds.action_dim);
  r.get("horizon", ds.horizon);
  r.get("n", n);
  r.get("n_demos", ds.n_demos);
  r.get("seed", ds.seed);
  ds.normalizer = action_normalizer_from_json(r.at("normalization"), "metadata.normalization");
  r.finish();

  std::ifstream csv(dir / "data.csv");
  if (!csv) throw std::runtime_error("cannot open " + (dir / "data.csv").string());
  std::string line;
  std::getline(csv, line);  // header
  const std::size_t width = 1 + static_cast<std::size_t>(ds.obs_dim + ds.chunk_dim());
  std::size_t row = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("data.csv:" + std::to_string(row + 2), "bad number '" + cell + "'");
      }
    }
    if (values.size() != width) {
      throw ConfigError("data.csv:" + std::to_string(row + 2),
                        "expected " + std::to_string(width) + " columns, got " +
                            std::to_string(values.size()));
    }
    ds.demo.push_back(static_cast<int>(values[0]));
    ds.obs.emplace_back(values.begin() + 1, values.begin() + 1 + ds.obs_dim);
    ds.chunks.emplace_back(values.begin() + 1 + ds.obs_dim, values.end());
    ++row;
  }
  if (row != n) {
    throw ConfigError("metadata.n", "declares " + std::to_string(n) + " rows, file has " +
                                        std::to_string(row));
  }
  ds.validate();
  return ds;
}

}  // namespace ofp
