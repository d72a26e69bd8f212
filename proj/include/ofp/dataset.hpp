#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ofp/flowcore.hpp"
#include "ofp/gmm_task.hpp"
#include "ofp/json_util.hpp"
#include "ofp/point_mass.hpp"

namespace ofp {

// Per-action-dimension affine map of [low, high] onto [-1, 1], pooled over
// the chunk horizon.
struct ActionNormalizer {
  std::vector<double> low;
  std::vector<double> high;

  static ActionNormalizer identity(int action_dim);
  static ActionNormalizer fit(const std::vector<Chunk>& chunks, int action_dim);

  Chunk apply(const Chunk& raw) const;
  Chunk invert(const Chunk& normalized) const;
};

Json to_json(const ActionNormalizer& n);
ActionNormalizer action_normalizer_from_json(const Json& j, const std::string& path);

struct Dataset {
  std::string task;
  int obs_dim = 0;
  int action_dim = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
  int n_demos = 0;  // demonstrations for trajectory tasks, items otherwise
  ActionNormalizer normalizer;
  std::vector<int> demo;  // demonstration index of each row
  std::vector<std::vector<double>> obs;
  std::vector<Chunk> chunks;  // raw scale

  std::size_t size() const { return chunks.size(); }
  int chunk_dim() const { return action_dim * horizon; }
  void validate() const;
};

// n independent (o, a) draws; normalization is the identity.
Dataset make_gmm_dataset(const GmmTaskSpec& spec, int n, std::uint64_t seed);
// n_demos scripted demonstrations; min/max action normalization.
Dataset make_point_mass_dataset(const PointMassConfig& c, int n_demos, std::uint64_t seed);

// <dir>/metadata.json and <dir>/data.csv with columns demo, o_0.., a_0..
// (chunk flattened step-major), values printed with 17 significant digits.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace ofp
