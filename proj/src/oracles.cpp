#include "ofp/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace ofp {

ad::Tensor SingleDatumField::evaluate(const IntervalQuery& q) const {
  if (q.z.cols() != a_.size()) throw std::invalid_argument("SingleDatumField: width mismatch");
  ad::Tensor u(q.z.shape);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double t = q.t[i];
    for (std::size_t j = 0; j < a_.size(); ++j) {
      // At t = 1 every sample already sits on a.
      u.at(i, j) = t < 1.0 ? (a_[j] - q.z.at(i, j)) / (1.0 - t) : 0.0;
    }
  }
  return u;
}

Chunk SingleDatumField::marginal_score(const Chunk& z, double t) const {
  if (!(t < 1.0)) throw std::domain_error("marginal_score: t must be < 1");
  Chunk s(z.size());
  const double var = (1.0 - t) * (1.0 - t);
  for (std::size_t j = 0; j < z.size(); ++j) s[j] = (t * a_[j] - z[j]) / var;
  return s;
}

ad::Tensor LinearPathField::evaluate(const IntervalQuery& q) const {
  if (q.z.cols() != velocity_.size()) throw std::invalid_argument("LinearPathField: width mismatch");
  ad::Tensor u(q.z.shape);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t j = 0; j < velocity_.size(); ++j) {
      u.at(i, j) = velocity_[j] + (delta_.empty() ? 0.0 : delta_[j]);
    }
  }
  return u;
}

double two_atom_posterior_mean(double z, double t) {
  if (t >= 1.0) return z;
  const double s = 1.0 - t;
  return std::tanh(t * z / (s * s));
}

double two_atom_velocity(double z, double t) {
  if (!(t < 1.0)) throw std::domain_error("two_atom_velocity: t must be < 1");
  return (two_atom_posterior_mean(z, t) - z) / (1.0 - t);
}

double two_atom_flow(double z, double t, double r, double max_step) {
  if (r < t) throw std::invalid_argument("two_atom_flow: r < t");
  if (r == t) return z;
  if (!(r < 1.0)) throw std::domain_error("two_atom_flow: field is singular at t = 1");
  const long n = std::max(1L, static_cast<long>(std::ceil((r - t) / max_step)));
  const double h = (r - t) / static_cast<double>(n);
  double x = z;
  for (long k = 0; k < n; ++k) {
    const double s = t + static_cast<double>(k) * h;
    const double k1 = two_atom_velocity(x, s);
    const double k2 = two_atom_velocity(x + 0.5 * h * k1, s + 0.5 * h);
    const double k3 = two_atom_velocity(x + 0.5 * h * k2, s + 0.5 * h);
    const double k4 = two_atom_velocity(x + h * k3, s + h);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

double TwoAtomIntervalField::interval_velocity(double z, double t, double r) const {
  if (r == t) return two_atom_velocity(z, t);
  return (two_atom_flow(z, t, r, max_step_) - z) / (r - t);
}

ad::Tensor TwoAtomIntervalField::evaluate(const IntervalQuery& q) const {
  if (q.z.cols() != 1) throw std::invalid_argument("TwoAtomIntervalField: expects one column");
  ad::Tensor u(q.z.shape);
  for (std::size_t i = 0; i < q.rows(); ++i) u.data[i] = interval_velocity(q.z.data[i], q.t[i], q.r[i]);
  return u;
}

}  // namespace ofp
