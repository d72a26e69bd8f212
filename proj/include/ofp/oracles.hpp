#pragma once

#include <vector>

#include "ofp/flowcore.hpp"
#include "ofp/net.hpp"

namespace ofp {

// Data is the single chunk a: p_t = N(t a, (1 - t)^2 I), and every trajectory
// is a straight line to a, so u(z, t, r) = (a - z) / (1 - t) for any r.
class SingleDatumField : public IntervalField {
 public:
  explicit SingleDatumField(Chunk a) : a_(std::move(a)) {}
  ad::Tensor evaluate(const IntervalQuery& q) const override;

  // Gaussian score of p_t at z.
  Chunk marginal_score(const Chunk& z, double t) const;

 private:
  Chunk a_;
};

// The constant conditional velocity a - eps of one straight path, optionally
// plus an injected error delta(z, t, r) = delta (constant).
class LinearPathField : public IntervalField {
 public:
  LinearPathField(Chunk velocity, Chunk delta = {})
      : velocity_(std::move(velocity)), delta_(std::move(delta)) {}
  ad::Tensor evaluate(const IntervalQuery& q) const override;

 private:
  Chunk velocity_;
  Chunk delta_;
};

// Two equally weighted atoms at -1 and +1 in one dimension.
double two_atom_posterior_mean(double z, double t);
// v(z, t) = (tanh(t z / (1 - t)^2) - z) / (1 - t)
double two_atom_velocity(double z, double t);

// Flow map of the marginal ODE by classical RK4 with steps no longer than
// max_step.
double two_atom_flow(double z, double t, double r, double max_step = 1e-4);

// u(z, t, r) = (flow(z, t, r) - z) / (r - t), and v(z, t) on the diagonal.
class TwoAtomIntervalField : public IntervalField {
 public:
  explicit TwoAtomIntervalField(double max_step = 1e-4) : max_step_(max_step) {}
  double interval_velocity(double z, double t, double r) const;
  ad::Tensor evaluate(const IntervalQuery& q) const override;

 private:
  double max_step_;
};

}  // namespace ofp
