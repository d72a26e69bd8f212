#pragma once

#include <string>
#include <vector>

#include "ofp/autodiff/tape.hpp"
#include "ofp/flowcore.hpp"
#include "ofp/json_util.hpp"
#include "ofp/net.hpp"

namespace ofp {

// Something that produces u(z, t, r | o) as a node on a tape. The student is a
// network with tracked parameters; teachers are networks bound to the EMA
// shadow or analytic fields.
class FieldExpr {
 public:
  virtual ~FieldExpr() = default;
  virtual ad::Var eval(ad::Tape& tape, const IntervalQuery& q) const = 0;
};

class NetExpr : public FieldExpr {
 public:
  NetExpr(const IntervalVelocityNet& net, IntervalVelocityNet::Bound params)
      : net_(net), params_(std::move(params)) {}
  ad::Var eval(ad::Tape& tape, const IntervalQuery& q) const override {
    return net_.forward(tape, params_, q);
  }

 private:
  const IntervalVelocityNet& net_;
  IntervalVelocityNet::Bound params_;
};

// Wraps a value-level field as a constant node.
class ConstantFieldExpr : public FieldExpr {
 public:
  explicit ConstantFieldExpr(const IntervalField& field) : field_(field) {}
  ad::Var eval(ad::Tape& tape, const IntervalQuery& q) const override {
    return tape.constant(field_.evaluate(q));
  }

 private:
  const IntervalField& field_;
};

struct LossWeights {
  double lambda_c = 1.0;
  double lambda_g = 0.05;
  double p_sc = 0.2;
  double p_sg = 0.1;
  double p_drop = 0.1;
  double ca_scale = 1.0;  // multiplies the guidance difference inside the target

  void validate() const;
};

Json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const Json& j, const std::string& path);

// Rows of a, eps are items; t is the start time of each item.
struct FlowBatch {
  ad::Tensor a;
  ad::Tensor eps;
  std::vector<double> t;
  CondBatch cond;
  std::size_t rows() const { return t.size(); }
};

struct ConsistencyBatch {
  ad::Tensor a;
  ad::Tensor eps;
  std::vector<TimeTriple> times;
  CondBatch cond;
  std::size_t rows() const { return times.size(); }
};

// eps0 places z_t on the path, eps1 re-noises the one-step prediction.
// Observations are always real here.
struct GuidanceBatch {
  ad::Tensor a;
  ad::Tensor eps0;
  ad::Tensor eps1;
  std::vector<double> t;
  std::vector<double> t_prime;
  ad::Tensor obs;
  std::size_t rows() const { return t.size(); }
};

struct TrainBatch {
  FlowBatch flow;
  ConsistencyBatch consistency;
  GuidanceBatch guidance;
};

// mean over items of |u(z_t, t, t | o) - (a - eps)|^2
ad::Var loss_flow(ad::Tape& tape, const FieldExpr& student, const FlowBatch& b);

// z_hat_r = z_m + (r - m) sg(u_teacher(z_m, m, r | o)); target = (z_hat_r - z_t) / (r - t).
// Rejects r == t.
ad::Var consistency_target(ad::Tape& tape, const FieldExpr& teacher, const ad::Tensor& z_m,
                           const ad::Tensor& z_t, const std::vector<TimeTriple>& times,
                           const CondBatch& cond);
ad::Tensor consistency_target(const IntervalField& teacher, const ad::Tensor& z_m,
                              const ad::Tensor& z_t, const std::vector<TimeTriple>& times,
                              const CondBatch& cond);

ad::Var loss_self_consistency(ad::Tape& tape, const FieldExpr& student, const FieldExpr& teacher,
                              const ConsistencyBatch& b);

struct GuidanceParts {
  ad::Var f;         // u_theta(z_t, t, 1 | o)
  ad::Var delta;     // sg(u_teacher(z~, t', t' | null) - u_teacher(z~, t', t' | o))
  ad::Var s_target;  // sg(f - ca_scale * delta)
  ad::Var loss;      // mean over items of |f - s_target|^2
};

GuidanceParts self_guidance(ad::Tape& tape, const FieldExpr& student, const FieldExpr& teacher,
                            const GuidanceBatch& b, double ca_scale = 1.0);

ad::Var loss_self_guidance(ad::Tape& tape, const FieldExpr& student, const FieldExpr& teacher,
                           const GuidanceBatch& b, double ca_scale = 1.0);

struct LossTerms {
  double total = 0.0;
  double flow = 0.0;
  double sc = 0.0;
  double sg = 0.0;
};

struct UnifiedLoss {
  ad::Var total;
  LossTerms terms;
};

// L = L_flow + lambda_c L_sc + lambda_g L_sg. Terms whose sub-batch is empty
// are left out and logged as 0.
UnifiedLoss unified_loss(ad::Tape& tape, const FieldExpr& student, const FieldExpr& teacher,
                         const TrainBatch& batch, const LossWeights& w);

}  // namespace ofp
