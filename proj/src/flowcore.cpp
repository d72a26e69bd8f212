#include "ofp/flowcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ofp {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": length mismatch " + std::to_string(a) +
                                " vs " + std::to_string(b));
  }
}

}  // namespace

Chunk ot_interpolate(std::span<const double> eps, std::span<const double> a, double t) {
  require_same(eps.size(), a.size(), "ot_interpolate");
  Chunk z(a.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1.0 - t) * eps[i] + t * a[i];
  return z;
}

Chunk interval_step(std::span<const double> z, double t, double r, std::span<const double> u) {
  require_same(z.size(), u.size(), "interval_step");
  if (r < t) throw std::invalid_argument("interval_step: r < t");
  Chunk out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] + (r - t) * u[i];
  return out;
}

Chunk score_from_velocity(std::span<const double> z, double t, std::span<const double> u_diag) {
  require_same(z.size(), u_diag.size(), "score_from_velocity");
  if (t >= 1.0 - 1e-6) throw std::domain_error("score_from_velocity: t too close to 1");
  Chunk s(z.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = (t * u_diag[i] - z[i]) / (1.0 - t);
  return s;
}

const char* interval_sampler_name(IntervalSampler s) {
  switch (s) {
    case IntervalSampler::kLogitNormal: return "logit_normal";
    case IntervalSampler::kLogNormal: return "log_normal";
    case IntervalSampler::kUniform: return "uniform";
  }
  return "?";
}

IntervalSampler interval_sampler_from_name(const std::string& name) {
  if (name == "logit_normal") return IntervalSampler::kLogitNormal;
  if (name == "log_normal") return IntervalSampler::kLogNormal;
  if (name == "uniform") return IntervalSampler::kUniform;
  throw std::invalid_argument("unknown interval sampler '" + name + "'");
}

void ScheduleConfig::validate() const {
  if (total_steps < 1) throw ConfigError("schedule.total_steps", "must be >= 1");
  if (!(contraction_power > 0)) throw ConfigError("schedule.contraction_power", "must be > 0");
  if (!(t_alpha > 0)) throw ConfigError("schedule.t_alpha", "must be > 0");
  if (!(t_beta > 0)) throw ConfigError("schedule.t_beta", "must be > 0");
  if (!(dt_sigma > 0)) throw ConfigError("schedule.dt_sigma", "must be > 0");
}

Json to_json(const ScheduleConfig& c) {
  return Json{{"contraction_power", c.contraction_power},
              {"t_alpha", c.t_alpha},
              {"t_beta", c.t_beta},
              {"dt_sampler", interval_sampler_name(c.dt_sampler)},
              {"dt_mu", c.dt_mu},
              {"dt_sigma", c.dt_sigma}};
}

ScheduleConfig schedule_config_from_json(const Json& j, const std::string& path) {
  ScheduleConfig c;
  JsonReader r(j, path);
  r.get("contraction_power", c.contraction_power);
  r.get("t_alpha", c.t_alpha);
  r.get("t_beta", c.t_beta);
  std::string sampler = interval_sampler_name(c.dt_sampler);
  r.get("dt_sampler", sampler);
  try {
    c.dt_sampler = interval_sampler_from_name(sampler);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.child("dt_sampler"), e.what());
  }
  r.get("dt_mu", c.dt_mu);
  r.get("dt_sigma", c.dt_sigma);
  r.finish();
  c.validate();
  return c;
}

double contraction(long step, const ScheduleConfig& c) {
  const double frac = std::clamp(static_cast<double>(step) / static_cast<double>(c.total_steps), 0.0, 1.0);
  return std::pow(1.0 - frac, c.contraction_power);
}

TimeTriple sample_training_times(Rng& rng, const ScheduleConfig& c, long step) {
  TimeTriple tt;
  tt.t = rng.beta(c.t_alpha, c.t_beta);
  double frac = 0.0;
  switch (c.dt_sampler) {
    case IntervalSampler::kLogitNormal:
      frac = 1.0 / (1.0 + std::exp(-rng.normal(c.dt_mu, c.dt_sigma)));
      break;
    case IntervalSampler::kLogNormal:
      frac = std::min(1.0, std::exp(rng.normal(c.dt_mu, c.dt_sigma)));
      break;
    case IntervalSampler::kUniform:
      frac = rng.uniform();
      break;
  }
  tt.r = std::min(1.0, tt.t + frac * (1.0 - tt.t));
  const double rho = contraction(step, c);
  tt.m = std::min(tt.r, tt.t + rng.uniform() * (tt.r - tt.t) * rho);
  return tt;
}

}  // namespace ofp
