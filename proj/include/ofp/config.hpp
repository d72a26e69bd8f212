#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ofp/eval.hpp"
#include "ofp/gmm_task.hpp"
#include "ofp/json_util.hpp"
#include "ofp/net.hpp"
#include "ofp/point_mass.hpp"
#include "ofp/trainer.hpp"

namespace ofp {

// Full run description. The top-level seed feeds dataset generation, network
// init, training and evaluation; sections carry no seeds of their own.
//
// Defaults: p_sc 0.2, p_sg 0.1, lambda_g 0.05, lambda_c 1, p_drop 0.1,
// t_w 0.15, t ~ Beta(1, 1.5), interval fraction sigmoid(N(-0.2, 1)),
// AdamW lr 1e-4 with betas (0.95, 0.999) and weight decay 1e-6, 500 warmup
// steps, EMA cap 0.9999 with power 0.75.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string task_kind = "gmm";  // "gmm" or "point_mass"
  int task_size = 4096;           // items for gmm, demonstrations for point_mass
  GmmTaskSpec gmm = ring_task();
  PointMassConfig point_mass;
  NetConfig net;
  TrainConfig train;
  EvalConfig eval;

  // Copies the top-level seed into every section and matches the network
  // dims to the task.
  void resolve();
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);
Json default_run_config_json(const std::string& task_kind);

// Sets the value at a dotted path, e.g. "train.loss.lambda_g=0.1". The value
// is parsed as JSON when possible and taken as a string otherwise. The path
// must already exist.
void apply_override(Json& j, const std::string& assignment);

// Defaults, then the file (when given), then overrides.
Json merged_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides);
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace ofp
