#include "ofp/losses.hpp"

#include <stdexcept>

namespace ofp {

namespace {

void in_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("loss.") + name, "must lie in [0, 1]");
}

ad::Tensor path_points(const ad::Tensor& eps, const ad::Tensor& a, const std::vector<double>& t) {
  if (eps.shape != a.shape || a.rows() != t.size()) {
    throw std::invalid_argument("batch shapes inconsistent: a " + ad::shape_string(a.shape) +
                                ", eps " + ad::shape_string(eps.shape));
  }
  ad::Tensor z(a.shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto zi = ot_interpolate(eps.row_span(i), a.row_span(i), t[i]);
    std::copy(zi.begin(), zi.end(), z.row_span(i).begin());
  }
  return z;
}

ad::Var batch_mean_sse(ad::Var pred, ad::Var target, std::size_t rows) {
  return ad::scale(ad::sse(pred, target), 1.0 / static_cast<double>(rows));
}

}  // namespace

void LossWeights::validate() const {
  in_unit(lambda_c, "lambda_c");
  in_unit(lambda_g, "lambda_g");
  in_unit(p_sc, "p_sc");
  in_unit(p_sg, "p_sg");
  in_unit(p_drop, "p_drop");
  if (!(ca_scale >= 0.0)) throw ConfigError("loss.ca_scale", "must be >= 0");
}

Json to_json(const LossWeights& w) {
  return Json{{"lambda_c", w.lambda_c}, {"lambda_g", w.lambda_g}, {"p_sc", w.p_sc},
              {"p_sg", w.p_sg},         {"p_drop", w.p_drop},     {"ca_scale", w.ca_scale}};
}

LossWeights loss_weights_from_json(const Json& j, const std::string& path) {
  LossWeights w;
  JsonReader r(j, path);
  r.get("lambda_c", w.lambda_c);
  r.get("lambda_g", w.lambda_g);
  r.get("p_sc", w.p_sc);
  r.get("p_sg", w.p_sg);
  r.get("p_drop", w.p_drop);
  r.get("ca_scale", w.ca_scale);
  r.finish();
  w.validate();
  return w;
}

ad::Var loss_flow(ad::Tape& tape, const FieldExpr& student, const FlowBatch& b) {
  if (b.rows() == 0) throw std::invalid_argument("loss_flow: empty batch");
  IntervalQuery q;
  q.z = path_points(b.eps, b.a, b.t);
  q.t = b.t;
  q.r = b.t;
  q.cond = b.cond;
  ad::Tensor velocity(b.a.shape);
  for (std::size_t i = 0; i < velocity.size(); ++i) velocity.data[i] = b.a.data[i] - b.eps.data[i];
  ad::Var pred = student.eval(tape, q);
  return batch_mean_sse(pred, tape.constant(std::move(velocity)), b.rows());
}

ad::Var consistency_target(ad::Tape& tape, const FieldExpr& teacher, const ad::Tensor& z_m,
                           const ad::Tensor& z_t, const std::vector<TimeTriple>& times,
                           const CondBatch& cond) {
  const std::size_t n = times.size();
  std::vector<double> jump(n), inv_len(n);
  IntervalQuery q;
  q.z = z_m;
  q.t.resize(n);
  q.r.resize(n);
  q.cond = cond;
  for (std::size_t i = 0; i < n; ++i) {
    const TimeTriple& tt = times[i];
    if (!(tt.r > tt.t)) throw std::domain_error("consistency_target: r must exceed t");
    if (tt.m < tt.t || tt.m > tt.r) throw std::domain_error("consistency_target: m outside [t, r]");
    q.t[i] = tt.m;
    q.r[i] = tt.r;
    jump[i] = tt.r - tt.m;
    inv_len[i] = 1.0 / (tt.r - tt.t);
  }
  ad::Var u_teacher = ad::stop_gradient(teacher.eval(tape, q));
  ad::Var z_r = ad::add(tape.constant(z_m), ad::scale_rows(u_teacher, jump));
  return ad::scale_rows(ad::sub(z_r, tape.constant(z_t)), inv_len);
}

ad::Tensor consistency_target(const IntervalField& teacher, const ad::Tensor& z_m,
                              const ad::Tensor& z_t, const std::vector<TimeTriple>& times,
                              const CondBatch& cond) {
  ad::Tape tape;
  ConstantFieldExpr expr(teacher);
  return tape.value(consistency_target(tape, expr, z_m, z_t, times, cond));
}

ad::Var loss_self_consistency(ad::Tape& tape, const FieldExpr& student, const FieldExpr& teacher,
                              const ConsistencyBatch& b) {
  const std::size_t n = b.rows();
  if (n == 0) throw std::invalid_argument("loss_self_consistency: empty batch");
  std::vector<double> t(n), m(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = b.times[i].t;
    m[i] = b.times[i].m;
    r[i] = b.times[i].r;
  }
  const ad::Tensor z_t = path_points(b.eps, b.a, t);
  const ad::Tensor z_m = path_points(b.eps, b.a, m);
  ad::Var target = consistency_target(tape, teacher, z_m, z_t, b.times, b.cond);

  IntervalQuery q;
  q.z = z_t;
  q.t = t;
  q.r = r;
  q.cond = b.cond;
  ad::Var pred = student.eval(tape, q);
  return batch_mean_sse(pred, target, n);
}

GuidanceParts self_guidance(ad::Tape& tape, const FieldExpr& student, const FieldExpr& teacher,
                            const GuidanceBatch& b, double ca_scale) {
  const std::size_t n = b.rows();
  if (n == 0) throw std::invalid_argument("self_guidance: empty batch");
  if (b.t_prime.size() != n || b.eps1.shape != b.a.shape || b.obs.rows() != n) {
    throw std::invalid_argument("self_guidance: batch shapes inconsistent");
  }
  const ad::Tensor z_t = path_points(b.eps0, b.a, b.t);

  IntervalQuery jump;
  jump.z = z_t;
  jump.t = b.t;
  jump.r.assign(n, 1.0);
  jump.cond = CondBatch::real(b.obs);
  ad::Var f = student.eval(tape, jump);

  // Re-noise the one-step prediction; only its value is needed since the
  // teacher output is detached.
  const auto fv = tape.data(f);
  const std::size_t d = b.a.cols();
  ad::Tensor renoised(b.a.shape);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = b.t[i], tp = b.t_prime[i];
    for (std::size_t j = 0; j < d; ++j) {
      const double a_hat = z_t.at(i, j) + (1.0 - t) * fv[i * d + j];
      renoised.at(i, j) = (1.0 - tp) * b.eps1.at(i, j) + tp * a_hat;
    }
  }

  // One teacher call on [null rows; real rows].
  IntervalQuery both;
  both.z = ad::Tensor({2 * n, d});
  std::copy(renoised.data.begin(), renoised.data.end(), both.z.data.begin());
  std::copy(renoised.data.begin(), renoised.data.end(),
            both.z.data.begin() + static_cast<std::ptrdiff_t>(n * d));
  both.t.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) both.t[i] = both.t[n + i] = b.t_prime[i];
  both.r = both.t;
  both.cond.obs = ad::Tensor({2 * n, b.obs.cols()});
  std::copy(b.obs.data.begin(), b.obs.data.end(), both.cond.obs.data.begin());
  std::copy(b.obs.data.begin(), b.obs.data.end(),
            both.cond.obs.data.begin() + static_cast<std::ptrdiff_t>(b.obs.size()));
  both.cond.null.assign(2 * n, 0);
  std::fill(both.cond.null.begin(), both.cond.null.begin() + static_cast<std::ptrdiff_t>(n), 1);

  ad::Var u = teacher.eval(tape, both);
  ad::Var delta = ad::stop_gradient(ad::sub(ad::slice_rows(u, 0, n), ad::slice_rows(u, n, 2 * n)));
  ad::Var s_target = ad::stop_gradient(ad::sub(f, ad::scale(delta, ca_scale)));
  ad::Var loss = batch_mean_sse(f, s_target, n);
  return GuidanceParts{f, delta, s_target, loss};
}

ad::Var loss_self_guidance(ad::Tape& tape, const FieldExpr& student, const FieldExpr& teacher,
                           const GuidanceBatch& b, double ca_scale) {
  return self_guidance(tape, student, teacher, b, ca_scale).loss;
}

UnifiedLoss unified_loss(ad::Tape& tape, const FieldExpr& student, const FieldExpr& teacher,
                         const TrainBatch& batch, const LossWeights& w) {
  UnifiedLoss out;
  bool have = false;
  auto accumulate = [&](ad::Var term, double weight) {
    ad::Var weighted = weight == 1.0 ? term : ad::scale(term, weight);
    out.total = have ? ad::add(out.total, weighted) : weighted;
    have = true;
  };
  if (batch.flow.rows() > 0) {
    ad::Var l = loss_flow(tape, student, batch.flow);
    out.terms.flow = tape.scalar(l);
    accumulate(l, 1.0);
  }
  if (batch.consistency.rows() > 0 && w.lambda_c > 0.0) {
    ad::Var l = loss_self_consistency(tape, student, teacher, batch.consistency);
    out.terms.sc = tape.scalar(l);
    accumulate(l, w.lambda_c);
  }
  if (batch.guidance.rows() > 0 && w.lambda_g > 0.0) {
    ad::Var l = loss_self_guidance(tape, student, teacher, batch.guidance, w.ca_scale);
    out.terms.sg = tape.scalar(l);
    accumulate(l, w.lambda_g);
  }
  if (!have) throw std::invalid_argument("unified_loss: batch has no items");
  out.terms.total = tape.scalar(out.total);
  return out;
}

}  // namespace ofp
