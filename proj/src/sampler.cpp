#include "ofp/sampler.hpp"

#include <stdexcept>
#include <string>

namespace ofp {

TimeGrid TimeGrid::uniform(int steps) {
  if (steps < 1) throw std::invalid_argument("TimeGrid::uniform: steps must be >= 1");
  TimeGrid g;
  g.taus.resize(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) g.taus[static_cast<std::size_t>(k)] = static_cast<double>(k) / steps;
  g.taus.back() = 1.0;
  return g;
}

void TimeGrid::validate() const {
  if (taus.size() < 2) throw std::invalid_argument("time grid needs at least two points");
  if (taus.front() != 0.0 || taus.back() != 1.0) {
    throw std::invalid_argument("time grid must start at 0 and end at 1");
  }
  for (std::size_t k = 1; k < taus.size(); ++k) {
    if (!(taus[k] > taus[k - 1])) {
      throw std::invalid_argument("time grid not strictly increasing at index " + std::to_string(k));
    }
  }
}

namespace {

void check_rows(const CondBatch& cond, const ad::Tensor& eps) {
  if (cond.rows() != eps.rows()) throw std::invalid_argument("sampler: condition/noise row mismatch");
}

IntervalQuery make_query(const ad::Tensor& z, const CondBatch& cond, double t, double r) {
  IntervalQuery q;
  q.z = z;
  q.t.assign(z.rows(), t);
  q.r.assign(z.rows(), r);
  q.cond = cond;
  return q;
}

void axpy(ad::Tensor& z, double h, const ad::Tensor& u) {
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] += h * u.data[i];
}

}  // namespace

ad::Tensor one_step_sample(const IntervalField& field, const CondBatch& cond, const ad::Tensor& eps) {
  check_rows(cond, eps);
  ad::Tensor z = eps;
  axpy(z, 1.0, field.evaluate(make_query(eps, cond, 0.0, 1.0)));
  return z;
}

ad::Tensor multi_step_sample(const IntervalField& field, const CondBatch& cond,
                             const ad::Tensor& eps, const TimeGrid& grid) {
  grid.validate();
  check_rows(cond, eps);
  ad::Tensor z = eps;
  for (std::size_t k = 0; k + 1 < grid.taus.size(); ++k) {
    const double t = grid.taus[k], r = grid.taus[k + 1];
    const ad::Tensor u = field.evaluate(make_query(z, cond, t, r));
    axpy(z, r - t, u);
  }
  return z;
}

ad::Tensor euler_sample(const IntervalField& field, const CondBatch& cond, const ad::Tensor& eps,
                        const TimeGrid& grid) {
  grid.validate();
  check_rows(cond, eps);
  ad::Tensor z = eps;
  for (std::size_t k = 0; k + 1 < grid.taus.size(); ++k) {
    const double t = grid.taus[k], r = grid.taus[k + 1];
    const ad::Tensor u = field.evaluate(make_query(z, cond, t, t));
    axpy(z, r - t, u);
  }
  return z;
}

Chunk build_warm_prior(const Chunk& prev_chunk, int exec_horizon, int action_dim) {
  if (action_dim < 1 || prev_chunk.size() % static_cast<std::size_t>(action_dim) != 0) {
    throw std::invalid_argument("build_warm_prior: chunk length not a multiple of action_dim");
  }
  const int horizon = static_cast<int>(prev_chunk.size()) / action_dim;
  if (exec_horizon < 1 || exec_horizon >= horizon) {
    throw std::invalid_argument("build_warm_prior: need 1 <= h < H (h=" + std::to_string(exec_horizon) +
                                ", H=" + std::to_string(horizon) + ")");
  }
  Chunk out(prev_chunk.size());
  const auto d = static_cast<std::size_t>(action_dim);
  for (int k = 0; k < horizon; ++k) {
    const int src = std::min(k + exec_horizon, horizon - 1);
    std::copy_n(prev_chunk.begin() + static_cast<std::ptrdiff_t>(src * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
  return out;
}

ad::Tensor warm_start_sample(const IntervalField& field, const CondBatch& cond,
                             const ad::Tensor& eps, const ad::Tensor& warm_prior, double t_w) {
  check_rows(cond, eps);
  if (warm_prior.shape != eps.shape) throw std::invalid_argument("warm prior shape differs from noise");
  if (!(t_w >= 0.0 && t_w <= 1.0)) throw std::invalid_argument("t_w must lie in [0, 1]");
  ad::Tensor z(eps.shape);
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = (1.0 - t_w) * eps.data[i] + t_w * warm_prior.data[i];
  const ad::Tensor u = field.evaluate(make_query(z, cond, t_w, 1.0));
  axpy(z, 1.0 - t_w, u);
  return z;
}

Chunk warm_start_sample(const IntervalField& field, const std::vector<double>& obs,
                        const Chunk& eps, const WarmState& warm, int action_dim) {
  const CondBatch cond = CondBatch::repeat(obs, 1);
  const ad::Tensor e = ad::Tensor::row(eps);
  if (!warm.prev_chunk) return one_step_sample(field, cond, e).data;
  const Chunk prior = build_warm_prior(*warm.prev_chunk, warm.exec_horizon, action_dim);
  return warm_start_sample(field, cond, e, ad::Tensor::row(prior), warm.t_w).data;
}

}  // namespace ofp
