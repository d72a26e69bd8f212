#pragma once

#include <optional>
#include <vector>

#include "ofp/flowcore.hpp"
#include "ofp/net.hpp"

namespace ofp {

// 0 = tau_0 < ... < tau_K = 1
struct TimeGrid {
  std::vector<double> taus;

  static TimeGrid uniform(int steps);
  int steps() const { return static_cast<int>(taus.size()) - 1; }
  void validate() const;
};

// Rows of eps are independent draws; every routine below calls the field
// once per solver step for the whole batch.

// a = eps + u(eps, 0, 1 | o)
ad::Tensor one_step_sample(const IntervalField& field, const CondBatch& cond, const ad::Tensor& eps);

// z_{k+1} = z_k + (tau_{k+1} - tau_k) u(z_k, tau_k, tau_{k+1} | o)
ad::Tensor multi_step_sample(const IntervalField& field, const CondBatch& cond,
                             const ad::Tensor& eps, const TimeGrid& grid);

// Euler integration of the instantaneous field u(z, tau, tau | o); the sampler
// used for plain flow-matching models.
ad::Tensor euler_sample(const IntervalField& field, const CondBatch& cond, const ad::Tensor& eps,
                        const TimeGrid& grid);

// [a_{h+1}, ..., a_H, a_H repeated h times]; actions are action_dim wide.
Chunk build_warm_prior(const Chunk& prev_chunk, int exec_horizon, int action_dim);

struct WarmState {
  std::optional<Chunk> prev_chunk;
  int exec_horizon = 4;
  double t_w = 0.15;
};

// z = (1 - t_w) eps + t_w a_warm; a = z + (1 - t_w) u(z, t_w, 1 | o). Rows of
// warm_prior pair with rows of eps.
ad::Tensor warm_start_sample(const IntervalField& field, const CondBatch& cond,
                             const ad::Tensor& eps, const ad::Tensor& warm_prior, double t_w);

// Single chunk; falls back to one_step_sample when there is no previous chunk.
Chunk warm_start_sample(const IntervalField& field, const std::vector<double>& obs,
                        const Chunk& eps, const WarmState& warm, int action_dim);

// Counts evaluate() calls of the wrapped field.
class CountingField : public IntervalField {
 public:
  explicit CountingField(const IntervalField& inner) : inner_(inner) {}
  ad::Tensor evaluate(const IntervalQuery& q) const override {
    ++calls_;
    return inner_.evaluate(q);
  }
  long calls() const { return calls_; }

 private:
  const IntervalField& inner_;
  mutable long calls_ = 0;
};

}  // namespace ofp
