#include "ofp/point_mass.hpp"

#include <algorithm>
#include <cmath>

namespace ofp {

void PointMassConfig::validate() const {
  if (!(dt > 0)) throw ConfigError("task.dt", "must be > 0");
  if (!(damping >= 0 && damping <= 1)) throw ConfigError("task.damping", "must lie in [0, 1]");
  if (!(arena > 0)) throw ConfigError("task.arena", "must be > 0");
  if (goals.empty()) throw ConfigError("task.goals", "at least one goal required");
  if (!(success_radius > 0)) throw ConfigError("task.success_radius", "must be > 0");
  if (max_steps < 1) throw ConfigError("task.max_steps", "must be >= 1");
  if (horizon < 2) throw ConfigError("task.horizon", "must be >= 2");
  if (exec_horizon < 1 || exec_horizon >= horizon) {
    throw ConfigError("task.exec_horizon", "must satisfy 1 <= h < horizon");
  }
  if (!(action_limit > 0)) throw ConfigError("task.action_limit", "must be > 0");
}

Json to_json(const PointMassConfig& c) {
  return Json{{"dt", c.dt},
              {"damping", c.damping},
              {"arena", c.arena},
              {"goals", c.goals},
              {"success_radius", c.success_radius},
              {"max_steps", c.max_steps},
              {"horizon", c.horizon},
              {"exec_horizon", c.exec_horizon},
              {"gain_p", c.gain_p},
              {"gain_d", c.gain_d},
              {"action_limit", c.action_limit},
              {"start_x", c.start_x},
              {"start_y", c.start_y}};
}

PointMassConfig point_mass_from_json(const Json& j, const std::string& path) {
  PointMassConfig c;
  JsonReader r(j, path);
  r.get("dt", c.dt);
  r.get("damping", c.damping);
  r.get("arena", c.arena);
  r.get("goals", c.goals);
  r.get("success_radius", c.success_radius);
  r.get("max_steps", c.max_steps);
  r.get("horizon", c.horizon);
  r.get("exec_horizon", c.exec_horizon);
  r.get("gain_p", c.gain_p);
  r.get("gain_d", c.gain_d);
  r.get("action_limit", c.action_limit);
  r.get("start_x", c.start_x);
  r.get("start_y", c.start_y);
  r.finish();
  c.validate();
  return c;
}

PointMassState env_step(const PointMassConfig& c, const PointMassState& s,
                        std::array<double, 2> action) {
  PointMassState n;
  n.vx = s.vx * c.damping + action[0] * c.dt;
  n.vy = s.vy * c.damping + action[1] * c.dt;
  n.px = std::clamp(s.px + n.vx * c.dt, -c.arena, c.arena);
  n.py = std::clamp(s.py + n.vy * c.dt, -c.arena, c.arena);
  return n;
}

std::vector<double> observe(const PointMassState& s) { return {s.px, s.py, s.vx, s.vy}; }

double goal_distance(const PointMassConfig& c, const PointMassState& s, std::size_t goal) {
  const auto& g = c.goals.at(goal);
  return std::hypot(s.px - g[0], s.py - g[1]);
}

bool at_any_goal(const PointMassConfig& c, const PointMassState& s) {
  for (std::size_t g = 0; g < c.goals.size(); ++g) {
    if (goal_distance(c, s, g) <= c.success_radius) return true;
  }
  return false;
}

PointMassState sample_start(const PointMassConfig& c, Rng& rng) {
  PointMassState s;
  s.px = rng.uniform(c.start_x[0], c.start_x[1]);
  s.py = rng.uniform(c.start_y[0], c.start_y[1]);
  return s;
}

Chunk scripted_expert_chunk(const PointMassConfig& c, const PointMassState& s, std::size_t goal) {
  const auto& g = c.goals.at(goal);
  Chunk chunk;
  chunk.reserve(static_cast<std::size_t>(c.chunk_dim()));
  PointMassState cur = s;
  for (int h = 0; h < c.horizon; ++h) {
    std::array<double, 2> a{
        std::clamp(c.gain_p * (g[0] - cur.px) - c.gain_d * cur.vx, -c.action_limit, c.action_limit),
        std::clamp(c.gain_p * (g[1] - cur.py) - c.gain_d * cur.vy, -c.action_limit, c.action_limit)};
    chunk.push_back(a[0]);
    chunk.push_back(a[1]);
    cur = env_step(c, cur, a);
  }
  return chunk;
}

Demonstration record_demonstration(const PointMassConfig& c, Rng& rng) {
  Demonstration d;
  PointMassState s = sample_start(c, rng);
  d.goal = rng.uniform_index(c.goals.size());
  for (int step = 0; step < c.max_steps; ++step) {
    if (goal_distance(c, s, d.goal) <= c.success_radius) {
      d.reached = true;
      break;
    }
    Chunk chunk = scripted_expert_chunk(c, s, d.goal);
    d.obs.push_back(observe(s));
    s = env_step(c, s, {chunk[0], chunk[1]});
    d.chunks.push_back(std::move(chunk));
  }
  if (!d.reached) d.reached = goal_distance(c, s, d.goal) <= c.success_radius;
  return d;
}

RolloutMetrics rollout(const PointMassConfig& c, const PolicyFn& policy, int episodes,
                       std::uint64_t seed) {
  RolloutMetrics m;
  m.episodes = episodes;
  const Rng root(seed, 0x7011);
  long successes = 0, total_steps = 0, diffs = 0, jumps = 0;
  double diff_sum = 0.0, jump_sum = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng = root.split(static_cast<std::uint64_t>(ep));
    PointMassState s = sample_start(c, rng);
    std::optional<Chunk> prev;
    std::optional<std::array<double, 2>> last_action;
    int steps = 0;
    bool success = false;
    while (steps < c.max_steps && !success) {
      Chunk chunk = policy(observe(s), prev, rng);
      ++m.chunks;
      for (int h = 0; h < c.exec_horizon && steps < c.max_steps; ++h) {
        std::array<double, 2> a{std::clamp(chunk[2 * h], -c.action_limit, c.action_limit),
                                std::clamp(chunk[2 * h + 1], -c.action_limit, c.action_limit)};
        if (last_action) {
          const double dx = a[0] - (*last_action)[0], dy = a[1] - (*last_action)[1];
          diff_sum += dx * dx + dy * dy;
          ++diffs;
          if (h == 0) {
            jump_sum += dx * dx + dy * dy;
            ++jumps;
          }
        }
        last_action = a;
        s = env_step(c, s, a);
        ++steps;
        if (at_any_goal(c, s)) {
          success = true;
          break;
        }
      }
      prev = std::move(chunk);
    }
    successes += success ? 1 : 0;
    total_steps += steps;
  }
  if (episodes > 0) {
    m.success_rate = static_cast<double>(successes) / episodes;
    m.mean_steps = static_cast<double>(total_steps) / episodes;
  }
  m.smoothness = diffs > 0 ? diff_sum / static_cast<double>(diffs) : 0.0;
  m.chunk_jump = jumps > 0 ? jump_sum / static_cast<double>(jumps) : 0.0;
  return m;
}

PolicyFn expert_policy(const PointMassConfig& c) {
  return [c](const std::vector<double>& obs, const std::optional<Chunk>&, Rng&) {
    PointMassState s{obs[0], obs[1], obs[2], obs[3]};
    std::size_t best = 0;
    for (std::size_t g = 1; g < c.goals.size(); ++g) {
      if (goal_distance(c, s, g) < goal_distance(c, s, best)) best = g;
    }
    return scripted_expert_chunk(c, s, best);
  };
}

}  // namespace ofp
