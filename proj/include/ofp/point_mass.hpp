#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ofp/flowcore.hpp"
#include "ofp/json_util.hpp"
#include "ofp/rng.hpp"

namespace ofp {

struct PointMassConfig {
  double dt = 0.1;
  double damping = 0.9;
  double arena = 1.0;  // positions are clipped to [-arena, arena]^2
  std::vector<std::array<double, 2>> goals{{-0.7, 0.7}, {0.7, 0.7}};
  double success_radius = 0.1;
  int max_steps = 100;
  int horizon = 8;
  int exec_horizon = 4;
  double gain_p = 4.0;
  double gain_d = 3.0;
  double action_limit = 1.0;
  std::array<double, 2> start_x{-0.3, 0.3};
  std::array<double, 2> start_y{-0.7, -0.3};

  static constexpr int kActionDim = 2;
  static constexpr int kObsDim = 4;
  int chunk_dim() const { return kActionDim * horizon; }
  void validate() const;
};

Json to_json(const PointMassConfig& c);
PointMassConfig point_mass_from_json(const Json& j, const std::string& path);

struct PointMassState {
  double px = 0.0, py = 0.0, vx = 0.0, vy = 0.0;
  bool operator==(const PointMassState&) const = default;
};

// v <- damping v + dt a; p <- p + dt v; p clipped to the arena.
PointMassState env_step(const PointMassConfig& c, const PointMassState& s,
                        std::array<double, 2> action);
std::vector<double> observe(const PointMassState& s);
double goal_distance(const PointMassConfig& c, const PointMassState& s, std::size_t goal);
bool at_any_goal(const PointMassConfig& c, const PointMassState& s);
PointMassState sample_start(const PointMassConfig& c, Rng& rng);

// Saturated PD control toward the goal, simulated forward for H steps.
Chunk scripted_expert_chunk(const PointMassConfig& c, const PointMassState& s, std::size_t goal);

struct Demonstration {
  std::vector<std::vector<double>> obs;
  std::vector<Chunk> chunks;
  std::size_t goal = 0;
  bool reached = false;
};

// The goal is drawn uniformly per demonstration; the expert acts closed-loop
// one step at a time and every visited state is recorded with its chunk.
Demonstration record_demonstration(const PointMassConfig& c, Rng& rng);

// Returns a raw-scale chunk for the observation. prev_chunk is the previous
// chunk of this episode, absent at the first control step.
using PolicyFn = std::function<Chunk(const std::vector<double>& obs,
                                     const std::optional<Chunk>& prev_chunk, Rng& rng)>;

struct RolloutMetrics {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;
  double smoothness = 0.0;  // mean |a_{k+1} - a_k|^2 over executed actions
  double chunk_jump = 0.0;  // same, restricted to chunk boundaries
  long chunks = 0;
};

RolloutMetrics rollout(const PointMassConfig& c, const PolicyFn& policy, int episodes,
                       std::uint64_t seed);

// Expert as a policy, steering toward whichever goal is nearer at each call.
PolicyFn expert_policy(const PointMassConfig& c);

}  // namespace ofp
