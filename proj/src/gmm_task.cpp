#include "ofp/gmm_task.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace ofp {

void GmmTaskSpec::validate() const {
  if (obs_dim < 1 || action_dim < 1 || horizon < 1) throw ConfigError("task", "dims must be >= 1");
  if (modes.empty()) throw ConfigError("task.modes", "at least one mode required");
  if (weights.size() != modes.size()) throw ConfigError("task.weights", "one weight per mode");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ConfigError("task.weights", "weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("task.weights", "weights must sum to 1");
  if (!(obs_high > obs_low)) throw ConfigError("task.obs_high", "must exceed obs_low");
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const GmmMode& m = modes[k];
    const std::string path = "task.modes[" + std::to_string(k) + "]";
    if (!(m.sigma >= 0.0)) throw ConfigError(path + ".sigma", "must be >= 0");
    if (m.kind == "ring") {
      if (action_dim != 2) throw ConfigError(path + ".kind", "ring modes need action_dim 2");
      if (obs_dim < 2) throw ConfigError(path + ".kind", "ring modes need obs_dim >= 2");
      if (m.count < 1 || m.index < 0 || m.index >= m.count) {
        throw ConfigError(path + ".index", "must lie in [0, count)");
      }
    } else if (m.kind == "constant") {
      if (m.value.size() != static_cast<std::size_t>(chunk_dim())) {
        throw ConfigError(path + ".value", "length must equal action_dim * horizon");
      }
    } else {
      throw ConfigError(path + ".kind", "unknown mode kind '" + m.kind + "'");
    }
  }
}

Json to_json(const GmmTaskSpec& s) {
  Json modes = Json::array();
  for (const auto& m : s.modes) {
    Json jm = {{"kind", m.kind}, {"sigma", m.sigma}};
    if (m.kind == "ring") {
      jm["index"] = m.index;
      jm["count"] = m.count;
    } else {
      jm["value"] = m.value;
    }
    modes.push_back(jm);
  }
  return Json{{"obs_dim", s.obs_dim},         {"action_dim", s.action_dim},
              {"horizon", s.horizon},         {"modes", modes},
              {"weights", s.weights},         {"obs_low", s.obs_low},
              {"obs_high", s.obs_high},       {"ring_radius", s.ring_radius},
              {"radius_gain", s.radius_gain}, {"angle_gain", s.angle_gain}};
}

GmmTaskSpec gmm_task_from_json(const Json& j, const std::string& path) {
  GmmTaskSpec s;
  JsonReader r(j, path);
  r.get("obs_dim", s.obs_dim);
  r.get("action_dim", s.action_dim);
  r.get("horizon", s.horizon);
  r.get("weights", s.weights);
  r.get("obs_low", s.obs_low);
  r.get("obs_high", s.obs_high);
  r.get("ring_radius", s.ring_radius);
  r.get("radius_gain", s.radius_gain);
  r.get("angle_gain", s.angle_gain);
  if (r.has("modes")) {
    const Json& modes = r.at("modes");
    if (!modes.is_array()) throw ConfigError(r.child("modes"), "expected an array");
    for (std::size_t k = 0; k < modes.size(); ++k) {
      GmmMode m;
      JsonReader mr(modes[k], r.child("modes") + "[" + std::to_string(k) + "]");
      mr.get("kind", m.kind);
      mr.get("index", m.index);
      mr.get("count", m.count);
      mr.get("value", m.value);
      mr.get("sigma", m.sigma);
      mr.finish();
      s.modes.push_back(m);
    }
  }
  r.finish();
  s.validate();
  return s;
}

GmmTaskSpec ring_task(int modes, int horizon, double sigma) {
  GmmTaskSpec s;
  s.horizon = horizon;
  for (int k = 0; k < modes; ++k) s.modes.push_back(GmmMode{"ring", k, modes, {}, sigma});
  s.weights.assign(static_cast<std::size_t>(modes), 1.0 / modes);
  return s;
}

GmmTaskSpec two_atom_task() {
  GmmTaskSpec s;
  s.obs_dim = 1;
  s.action_dim = 1;
  s.horizon = 1;
  s.modes = {GmmMode{"constant", 0, 1, {-1.0}, 0.0}, GmmMode{"constant", 0, 1, {1.0}, 0.0}};
  s.weights = {0.5, 0.5};
  return s;
}

Chunk gmm_mode_mean(const GmmTaskSpec& spec, std::size_t mode, const std::vector<double>& obs) {
  const GmmMode& m = spec.modes.at(mode);
  if (m.kind == "constant") return m.value;
  const double angle = 2.0 * std::numbers::pi * m.index / m.count + spec.angle_gain * obs.at(0);
  const double radius = spec.ring_radius + spec.radius_gain * obs.at(1);
  Chunk out(static_cast<std::size_t>(spec.chunk_dim()));
  for (int h = 0; h < spec.horizon; ++h) {
    const double frac = static_cast<double>(h + 1) / spec.horizon;
    out[static_cast<std::size_t>(2 * h)] = radius * std::cos(angle) * frac;
    out[static_cast<std::size_t>(2 * h + 1)] = radius * std::sin(angle) * frac;
  }
  return out;
}

std::size_t gmm_sample_mode(const GmmTaskSpec& spec, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < spec.weights.size(); ++k) {
    acc += spec.weights[k];
    if (u < acc) return k;
  }
  return spec.weights.size() - 1;
}

Chunk gmm_expert_sample(const GmmTaskSpec& spec, const std::vector<double>& obs, Rng& rng) {
  const std::size_t k = gmm_sample_mode(spec, rng);
  Chunk a = gmm_mode_mean(spec, k, obs);
  const double sigma = spec.modes[k].sigma;
  if (sigma > 0.0) {
    for (double& v : a) v += sigma * rng.normal();
  }
  return a;
}

std::vector<double> gmm_sample_obs(const GmmTaskSpec& spec, Rng& rng) {
  std::vector<double> o(static_cast<std::size_t>(spec.obs_dim));
  for (double& v : o) v = rng.uniform(spec.obs_low, spec.obs_high);
  return o;
}

}  // namespace ofp
