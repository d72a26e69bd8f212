#pragma once

#include <string>
#include <vector>

#include "ofp/flowcore.hpp"
#include "ofp/json_util.hpp"
#include "ofp/rng.hpp"

namespace ofp {

// Mean chunk of one mixture component as a function of the observation.
//   ring:     angle 2 pi k / K + angle_gain o_0, radius r0 + radius_gain o_1,
//             step h (1-based) of the chunk is radius [cos, sin] h / H
//   constant: a fixed chunk, independent of o
struct GmmMode {
  std::string kind = "ring";
  int index = 0;
  int count = 1;
  std::vector<double> value;
  double sigma = 0.05;
};

struct GmmTaskSpec {
  int obs_dim = 2;
  int action_dim = 2;
  int horizon = 4;
  std::vector<GmmMode> modes;
  std::vector<double> weights;
  double obs_low = -1.0;
  double obs_high = 1.0;
  double ring_radius = 0.8;
  double radius_gain = 0.1;
  double angle_gain = 0.5;

  int chunk_dim() const { return action_dim * horizon; }
  void validate() const;
};

Json to_json(const GmmTaskSpec& s);
GmmTaskSpec gmm_task_from_json(const Json& j, const std::string& path);

// K equally weighted ring modes, 2-D observations and actions.
GmmTaskSpec ring_task(int modes = 8, int horizon = 4, double sigma = 0.05);
// Scalar actions at -1 and +1 with weight 1/2 each and no spread; the
// observation is ignored.
GmmTaskSpec two_atom_task();

Chunk gmm_mode_mean(const GmmTaskSpec& spec, std::size_t mode, const std::vector<double>& obs);
std::size_t gmm_sample_mode(const GmmTaskSpec& spec, Rng& rng);
Chunk gmm_expert_sample(const GmmTaskSpec& spec, const std::vector<double>& obs, Rng& rng);
std::vector<double> gmm_sample_obs(const GmmTaskSpec& spec, Rng& rng);

}  // namespace ofp
