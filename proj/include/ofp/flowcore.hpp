#pragma once

#include <span>
#include <string>
#include <vector>

#include "ofp/json_util.hpp"
#include "ofp/rng.hpp"

namespace ofp {

using Chunk = std::vector<double>;

// z_t = (1 - t) eps + t a
Chunk ot_interpolate(std::span<const double> eps, std::span<const double> a, double t);

// z_r = z + (r - t) u
Chunk interval_step(std::span<const double> z, double t, double r, std::span<const double> u);

// s = (t u - z) / (1 - t); rejects t >= 1 - 1e-6.
Chunk score_from_velocity(std::span<const double> z, double t, std::span<const double> u_diag);

struct TimeTriple {
  double t = 0.0;
  double r = 0.0;
  double m = 0.0;
};

enum class IntervalSampler {
  kLogitNormal,  // r - t = sigmoid(N(mu, sigma)) (1 - t)
  kLogNormal,    // r - t = min(1, exp(N(mu, sigma))) (1 - t)
  kUniform,      // r - t = U[0, 1) (1 - t)
};

const char* interval_sampler_name(IntervalSampler s);
IntervalSampler interval_sampler_from_name(const std::string& name);

struct ScheduleConfig {
  long total_steps = 1;
  double contraction_power = 2.0;
  double t_alpha = 1.0;
  double t_beta = 1.5;
  IntervalSampler dt_sampler = IntervalSampler::kLogitNormal;
  double dt_mu = -0.2;
  double dt_sigma = 1.0;

  void validate() const;
};

// Fields other than total_steps, which the trainer derives from the data size.
Json to_json(const ScheduleConfig& c);
ScheduleConfig schedule_config_from_json(const Json& j, const std::string& path);

// rho(s) = (1 - s / S)^p, clamped to [0, 1].
double contraction(long step, const ScheduleConfig& c);

TimeTriple sample_training_times(Rng& rng, const ScheduleConfig& c, long step);

}  // namespace ofp
