#pragma once

#include <string>
#include <vector>

#include "ofp/checkpoint.hpp"
#include "ofp/dataset.hpp"
#include "ofp/gmm_task.hpp"
#include "ofp/point_mass.hpp"
#include "ofp/report.hpp"
#include "ofp/sampler.hpp"

namespace ofp {

// 2 E|X - Y| - E|X - X'| - E|Y - Y'| over all pairs (V-statistic), clamped
// at 0. Rows are samples.
double energy_distance(const ad::Tensor& p, const ad::Tensor& q);

enum class SamplerKind {
  kInterval,  // chained interval jumps u(z, tau_k, tau_{k+1})
  kEuler,     // Euler steps on the diagonal u(z, tau, tau)
};

SamplerKind sampler_kind_from_name(const std::string& name);
const char* sampler_kind_name(SamplerKind k);

// `steps` network calls on a uniform grid over [0, 1].
ad::Tensor generate(const IntervalField& field, SamplerKind kind, const CondBatch& cond,
                    const ad::Tensor& eps, int steps);

// Starts at t_w from (1 - t_w) eps + t_w prior and takes `steps` uniform steps
// over [t_w, 1]. With steps = 1 this is warm_start_sample.
ad::Tensor generate_warm(const IntervalField& field, SamplerKind kind, const CondBatch& cond,
                         const ad::Tensor& eps, const ad::Tensor& prior, double t_w, int steps);

struct EvalConfig {
  std::vector<int> nfe_list{1, 4, 100};
  std::vector<bool> warm_options{false};
  int episodes = 200;
  int conditions = 8;
  int samples_per_condition = 1000;
  double t_w = 0.15;
  std::string sampler = "interval";
  std::string weights = "ema";  // "ema" or "student"
  std::uint64_t seed = 0;

  void validate() const;
};

Json to_json(const EvalConfig& c);
EvalConfig eval_config_from_json(const Json& j, const std::string& path);

// Model chunks for point-mass control: samples in normalized space and returns
// raw actions. Warm starts build the prior from the previous raw chunk.
PolicyFn model_policy(const IntervalField& field, const ActionNormalizer& normalizer,
                      SamplerKind kind, int nfe, bool warm, double t_w, int exec_horizon,
                      int action_dim, int horizon);

struct EvalOutput {
  Report report;
  Scatter scatter;
  Json timing = Json::object();  // wall-clock per cell, kept out of the report
};

EvalOutput policy_eval_gmm(const Checkpoint& ckpt, const GmmTaskSpec& task, const EvalConfig& c);
EvalOutput policy_eval_point_mass(const Checkpoint& ckpt, const PointMassConfig& task,
                                  const EvalConfig& c);

// Mean wall-clock milliseconds to generate one chunk with `nfe` calls.
double chunk_latency_ms(const IntervalField& field, SamplerKind kind, const std::vector<double>& obs,
                        int chunk_dim, int nfe, int repeats, std::uint64_t seed);

}  // namespace ofp
