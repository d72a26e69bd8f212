#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "ofp/autodiff/tape.hpp"
#include "ofp/json_util.hpp"
#include "ofp/params.hpp"

namespace ofp {

struct NetConfig {
  int action_dim = 2;
  int horizon = 8;
  int obs_dim = 4;
  int hidden_width = 256;
  int depth = 4;
  int time_embed_dim = 64;  // per embedding (start time and interval length)
  std::uint64_t seed = 0;

  int chunk_dim() const { return action_dim * horizon; }
  void validate() const;
};

Json to_json(const NetConfig& c);
NetConfig net_config_from_json(const Json& j, const std::string& path = "net");

// Observations for a batch, one row per item. Rows flagged null are replaced by
// the learned null token and their observation values are ignored.
struct CondBatch {
  ad::Tensor obs;
  std::vector<std::uint8_t> null;

  std::size_t rows() const { return null.size(); }
  static CondBatch real(ad::Tensor obs);
  static CondBatch all_null(std::size_t rows, std::size_t obs_dim);
  static CondBatch repeat(const std::vector<double>& obs, std::size_t rows, bool is_null = false);
  CondBatch as_null() const;
};

// Batched (z, t, r | o) input of the interval-velocity field.
struct IntervalQuery {
  ad::Tensor z;
  std::vector<double> t;
  std::vector<double> r;
  CondBatch cond;

  std::size_t rows() const { return t.size(); }
  // Rejects shape mismatches and times outside 0 <= t <= r <= 1.
  void validate(std::size_t chunk_dim, std::size_t obs_dim) const;
};

// Anything that maps a query to average velocities over [t, r], row-wise.
class IntervalField {
 public:
  virtual ~IntervalField() = default;
  virtual ad::Tensor evaluate(const IntervalQuery& q) const = 0;
};

// [sin(x f_k), cos(x f_k)] with frequencies log-spaced over [1, 1e4].
std::vector<double> sinusoidal_embedding(double x, int dim);

// u_theta(z, t, r | o). The start time t and the interval length r - t are
// embedded, concatenated and projected; the projection is concatenated with z
// and the condition embedding and fed through a SiLU MLP trunk.
class IntervalVelocityNet {
 public:
  using Bound = std::vector<ad::Var>;

  explicit IntervalVelocityNet(const NetConfig& config);
  IntervalVelocityNet(const IntervalVelocityNet& other);
  IntervalVelocityNet& operator=(const IntervalVelocityNet& other);

  const NetConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Builds the forward graph for `params` bound on `tape`. Counts as one
  // network evaluation regardless of batch size.
  ad::Var forward(ad::Tape& tape, const Bound& params, const IntervalQuery& q) const;
  ad::Var encode_condition(ad::Tape& tape, const Bound& params, const CondBatch& cond) const;

  ad::Tensor evaluate(const ParamStore& params, const IntervalQuery& q) const;
  ad::Tensor evaluate(const IntervalQuery& q) const { return evaluate(params_, q); }

  std::vector<double> forward_interval_velocity(const std::vector<double>& z, double t, double r,
                                                const std::vector<double>& obs,
                                                bool use_null) const;
  std::vector<double> encode_condition(const std::vector<double>& obs, bool use_null) const;

  std::uint64_t forward_count() const { return calls_.load(); }
  void reset_forward_count() const { calls_.store(0); }

 private:
  void build_layout();
  void initialize();

  NetConfig config_;
  ParamStore params_;
  std::size_t time_w_ = 0, time_b_ = 0;
  std::size_t cond1_w_ = 0, cond1_b_ = 0, cond2_w_ = 0, cond2_b_ = 0;
  std::size_t null_token_ = 0;
  std::vector<std::size_t> trunk_w_, trunk_b_;
  std::size_t out_w_ = 0, out_b_ = 0;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// The network evaluated with a particular parameter set (student or EMA shadow).
class NetField : public IntervalField {
 public:
  NetField(const IntervalVelocityNet& net, const ParamStore& params) : net_(net), params_(params) {}
  ad::Tensor evaluate(const IntervalQuery& q) const override { return net_.evaluate(params_, q); }

 private:
  const IntervalVelocityNet& net_;
  const ParamStore& params_;
};

// beta(step) = min(beta_max, 1 - (1 + step)^(-power))
double ema_beta(long step, double beta_max = 0.9999, double power = 0.75);

// Slowly moving copy of the student used to produce training targets. Never
// bound with gradient tracking outside of audits.
struct EmaTeacher {
  ParamStore shadow;
  long step_count = 0;
  double beta_max = 0.9999;
  double power = 0.75;

  static EmaTeacher from(const ParamStore& student, double beta_max = 0.9999,
                         double power = 0.75);
  // shadow <- beta(step) * shadow + (1 - beta(step)) * student
  void update(const ParamStore& student, long step);
};

}  // namespace ofp
