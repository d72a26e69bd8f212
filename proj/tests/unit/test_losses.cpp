#include <doctest.h>

#include <cmath>
#include <vector>

#include "ofp/losses.hpp"
#include "ofp/oracles.hpp"
#include "ofp/rng.hpp"

using namespace ofp;

namespace {

// Returns a fixed table of rows, regardless of the query.
class TableField : public IntervalField {
 public:
  explicit TableField(ad::Tensor rows) : rows_(std::move(rows)) {}
  ad::Tensor evaluate(const IntervalQuery&) const override { return rows_; }

 private:
  ad::Tensor rows_;
};

// Returns z plus a constant per-branch offset and keeps the last query.
class RecordingField : public IntervalField {
 public:
  RecordingField(double real_offset, double null_offset)
      : real_(real_offset), null_(null_offset) {}
  ad::Tensor evaluate(const IntervalQuery& q) const override {
    last = q;
    ad::Tensor out = q.z;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (double& v : out.row_span(i)) v += q.cond.null[i] ? null_ : real_;
    }
    return out;
  }
  mutable IntervalQuery last;

 private:
  double real_, null_;
};

NetConfig tiny() {
  NetConfig c;
  c.action_dim = 2;
  c.horizon = 2;
  c.obs_dim = 2;
  c.hidden_width = 8;
  c.depth = 2;
  c.time_embed_dim = 4;
  c.seed = 21;
  return c;
}

ad::Tensor randn(Rng& rng, std::size_t rows, std::size_t cols) {
  ad::Tensor t({rows, cols});
  rng.fill_normal(t.data);
  return t;
}

FlowBatch flow_batch(Rng& rng, std::size_t n, std::size_t d, std::size_t od) {
  FlowBatch b;
  b.a = randn(rng, n, d);
  b.eps = randn(rng, n, d);
  for (std::size_t i = 0; i < n; ++i) b.t.push_back(rng.uniform());
  b.cond = CondBatch::real(randn(rng, n, od));
  return b;
}

ConsistencyBatch consistency_batch(Rng& rng, std::size_t n, std::size_t d, std::size_t od) {
  ConsistencyBatch b;
  b.a = randn(rng, n, d);
  b.eps = randn(rng, n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, 0.5);
    const double r = rng.uniform(t + 0.1, 1.0);
    b.times.push_back({t, r, rng.uniform(t, r)});
  }
  b.cond = CondBatch::real(randn(rng, n, od));
  return b;
}

GuidanceBatch guidance_batch(Rng& rng, std::size_t n, std::size_t d, std::size_t od) {
  GuidanceBatch b;
  b.a = randn(rng, n, d);
  b.eps0 = randn(rng, n, d);
  b.eps1 = randn(rng, n, d);
  for (std::size_t i = 0; i < n; ++i) {
    b.t.push_back(rng.uniform(0.0, 0.9));
    b.t_prime.push_back(rng.uniform(0.05, 0.95));
  }
  b.obs = randn(rng, n, od);
  return b;
}

ad::Tensor velocity_rows(const ad::Tensor& a, const ad::Tensor& eps) {
  ad::Tensor v(a.shape);
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] = a.data[i] - eps.data[i];
  return v;
}

std::vector<double> student_gradient(const IntervalVelocityNet& net, const IntervalVelocityNet& teacher,
                                     const TrainBatch& batch, const LossWeights& w) {
  ad::Tape tape;
  const auto bound = net.params().bind(tape, true);
  NetExpr student(net, bound);
  NetExpr teach(teacher, teacher.params().bind(tape, false));
  const UnifiedLoss l = unified_loss(tape, student, teach, batch, w);
  return net.params().flat_gradient(tape.backward(l.total), bound);
}

}  // namespace

TEST_CASE("flow loss") {
  Rng rng(1);
  const FlowBatch b = flow_batch(rng, 5, 3, 2);

  ad::Tape tape;
  TableField perfect(velocity_rows(b.a, b.eps));
  CHECK(tape.scalar(loss_flow(tape, ConstantFieldExpr(perfect), b)) == 0.0);

  ad::Tensor shifted = velocity_rows(b.a, b.eps);
  const std::vector<double> c{0.5, -1.0, 2.0};
  for (std::size_t i = 0; i < shifted.rows(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) shifted.at(i, j) += c[j];
  }
  TableField biased(shifted);
  CHECK(tape.scalar(loss_flow(tape, ConstantFieldExpr(biased), b)) ==
        doctest::Approx(0.25 + 1.0 + 4.0).epsilon(1e-12));

  CHECK_THROWS_AS(loss_flow(tape, ConstantFieldExpr(perfect), FlowBatch{}), std::invalid_argument);
}

TEST_CASE("consistency target") {
  const Chunk eps{0.3, -0.8};
  const Chunk a{1.0, 0.4};
  const Chunk u{a[0] - eps[0], a[1] - eps[1]};
  auto point = [&](double t) { return ad::Tensor::row(ot_interpolate(eps, a, t)); };
  const CondBatch cond = CondBatch::all_null(1, 1);

  SUBCASE("exact teacher recovers the path velocity") {
    LinearPathField exact(u);
    for (TimeTriple tt : {TimeTriple{0.1, 0.9, 0.4}, TimeTriple{0.0, 1.0, 0.0},
                          TimeTriple{0.3, 0.35, 0.35}}) {
      const ad::Tensor target = consistency_target(exact, point(tt.m), point(tt.t), {tt}, cond);
      for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(target.data[j] - u[j]) < 1e-12);
    }
  }

  SUBCASE("constant teacher error is scaled by (r - m) / (r - t)") {
    LinearPathField off(u, Chunk{0.01, 0.01});
    const TimeTriple tt{0.25, 0.75, 0.5};
    const ad::Tensor target = consistency_target(off, point(tt.m), point(tt.t), {tt}, cond);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::abs((target.data[j] - u[j]) - 0.005) < 1e-12);
    }
  }

  SUBCASE("m = r ignores the teacher") {
    LinearPathField off(u, Chunk{5.0, -7.0});
    const TimeTriple tt{0.2, 0.6, 0.6};
    const ad::Tensor target = consistency_target(off, point(tt.m), point(tt.t), {tt}, cond);
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(target.data[j] - u[j]) < 1e-12);
  }

  SUBCASE("degenerate interval rejected") {
    LinearPathField exact(u);
    const TimeTriple tt{0.4, 0.4, 0.4};
    CHECK_THROWS_AS(consistency_target(exact, point(0.4), point(0.4), {tt}, cond), std::domain_error);
  }
}

TEST_CASE("self-consistency loss") {
  Rng rng(2);
  const IntervalVelocityNet net(tiny());
  NetConfig tc = tiny();
  tc.seed = 22;
  const IntervalVelocityNet teacher(tc);
  const ConsistencyBatch b = consistency_batch(rng, 4, 4, 2);

  SUBCASE("exact student and teacher give zero") {
    ConsistencyBatch one = b;
    one.times.resize(1);
    one.a = ad::Tensor::row(std::vector<double>(b.a.row_span(0).begin(), b.a.row_span(0).end()));
    one.eps = ad::Tensor::row(std::vector<double>(b.eps.row_span(0).begin(), b.eps.row_span(0).end()));
    one.cond = CondBatch::all_null(1, 2);
    LinearPathField exact(Chunk(velocity_rows(one.a, one.eps).data));
    ConstantFieldExpr e(exact);
    ad::Tape tape;
    CHECK(tape.scalar(loss_self_consistency(tape, e, e, one)) < 1e-24);
  }

  SUBCASE("no gradient reaches the teacher") {
    ad::Tape tape;
    const auto sb = net.params().bind(tape, true);
    const auto tb = teacher.params().bind(tape, true);
    ad::Var l = loss_self_consistency(tape, NetExpr(net, sb), NetExpr(teacher, tb), b);
    const auto grads = tape.backward(l);
    for (double g : teacher.params().flat_gradient(grads, tb)) CHECK(g == 0.0);
    double norm = 0.0;
    for (double g : net.params().flat_gradient(grads, sb)) norm += g * g;
    CHECK(norm > 0.0);
  }
}

TEST_CASE("self-guidance") {
  Rng rng(3);
  const IntervalVelocityNet net(tiny());
  NetConfig tc = tiny();
  tc.seed = 23;
  const IntervalVelocityNet teacher(tc);

  SUBCASE("residual equals the guidance difference") {
    const GuidanceBatch b = guidance_batch(rng, 3, 4, 2);
    ad::Tape tape;
    const auto sb = net.params().bind(tape, true);
    const auto tb = teacher.params().bind(tape, true);
    const GuidanceParts p = self_guidance(tape, NetExpr(net, sb), NetExpr(teacher, tb), b);
    const auto f = tape.data(p.f);
    const auto s = tape.data(p.s_target);
    const auto d = tape.data(p.delta);
    double sq = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(std::abs((f[i] - s[i]) - d[i]) < 1e-15);
      sq += d[i] * d[i];
    }
    CHECK(tape.scalar(p.loss) == doctest::Approx(sq / 3.0).epsilon(1e-12));
    const auto grads = tape.backward(p.loss);
    for (double g : teacher.params().flat_gradient(grads, tb)) CHECK(g == 0.0);
  }

  SUBCASE("teacher branches agree: zero loss and zero gradient") {
    const GuidanceBatch b = guidance_batch(rng, 3, 4, 2);
    RecordingField same(0.25, 0.25);
    ad::Tape tape;
    const auto sb = net.params().bind(tape, true);
    ad::Var l = loss_self_guidance(tape, NetExpr(net, sb), ConstantFieldExpr(same), b);
    CHECK(tape.scalar(l) == 0.0);
    for (double g : net.params().flat_gradient(tape.backward(l), sb)) CHECK(g == 0.0);
  }

  SUBCASE("t = 1 re-noises the data point") {
    GuidanceBatch b = guidance_batch(rng, 2, 4, 2);
    b.t = {1.0, 1.0};
    RecordingField rec(0.0, 0.1);
    ad::Tape tape;
    const auto sb = net.params().bind(tape, true);
    self_guidance(tape, NetExpr(net, sb), ConstantFieldExpr(rec), b);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        const double expected = (1.0 - b.t_prime[i]) * b.eps1.at(i, j) + b.t_prime[i] * b.a.at(i, j);
        CHECK(rec.last.z.at(i, j) == doctest::Approx(expected).epsilon(1e-14));
        CHECK(rec.last.z.at(i + 2, j) == rec.last.z.at(i, j));
      }
    }
  }

  SUBCASE("gradient is twice the VJP of f with the guidance difference") {
    const GuidanceBatch b = guidance_batch(rng, 1, 4, 2);
    ad::Tape tape;
    const auto sb = net.params().bind(tape, true);
    NetExpr teach(teacher, teacher.params().bind(tape, false));
    const GuidanceParts p = self_guidance(tape, NetExpr(net, sb), teach, b);
    const auto g_loss = net.params().flat_gradient(tape.backward(p.loss), sb);

    ad::Tape vjp_tape;
    const auto vb = net.params().bind(vjp_tape, true);
    IntervalQuery q;
    q.z = ad::Tensor({1, 4});
    for (std::size_t j = 0; j < 4; ++j) {
      q.z.data[j] = (1.0 - b.t[0]) * b.eps0.data[j] + b.t[0] * b.a.data[j];
    }
    q.t = b.t;
    q.r = {1.0};
    q.cond = CondBatch::real(b.obs);
    ad::Var f = net.forward(vjp_tape, vb, q);
    ad::Var dot = ad::sum(ad::mul(f, vjp_tape.constant(tape.value(p.delta))));
    const auto g_vjp = net.params().flat_gradient(vjp_tape.backward(dot), vb);
    REQUIRE(g_loss.size() == g_vjp.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < g_loss.size(); ++i) {
      worst = std::max(worst, std::abs(g_loss[i] - 2.0 * g_vjp[i]));
    }
    CHECK(worst < 1e-10);
  }

  SUBCASE("empty batch rejected") {
    ad::Tape tape;
    RecordingField rec(0.0, 0.0);
    CHECK_THROWS_AS(loss_self_guidance(tape, ConstantFieldExpr(rec), ConstantFieldExpr(rec),
                                       GuidanceBatch{}),
                    std::invalid_argument);
  }
}

TEST_CASE("unified loss") {
  Rng rng(4);
  const IntervalVelocityNet net(tiny());
  NetConfig tc = tiny();
  tc.seed = 24;
  const IntervalVelocityNet teacher(tc);
  TrainBatch batch;
  batch.flow = flow_batch(rng, 4, 4, 2);
  batch.consistency = consistency_batch(rng, 2, 4, 2);
  batch.guidance = guidance_batch(rng, 2, 4, 2);

  SUBCASE("zero weights reduce to the flow loss") {
    LossWeights w;
    w.lambda_c = 0.0;
    w.lambda_g = 0.0;
    ad::Tape tape;
    const auto sb = net.params().bind(tape, true);
    NetExpr s(net, sb);
    NetExpr t(teacher, teacher.params().bind(tape, false));
    const UnifiedLoss u = unified_loss(tape, s, t, batch, w);
    ad::Tape tape2;
    const auto sb2 = net.params().bind(tape2, true);
    ad::Var lf = loss_flow(tape2, NetExpr(net, sb2), batch.flow);
    CHECK(u.terms.total == tape2.scalar(lf));
    CHECK(net.params().flat_gradient(tape.backward(u.total), sb) ==
          net.params().flat_gradient(tape2.backward(lf), sb2));
  }

  SUBCASE("weighted terms add up to the total") {
    LossWeights w;
    w.lambda_c = 0.7;
    w.lambda_g = 0.3;
    ad::Tape tape;
    NetExpr s(net, net.params().bind(tape, true));
    NetExpr t(teacher, teacher.params().bind(tape, false));
    const UnifiedLoss u = unified_loss(tape, s, t, batch, w);
    CHECK(u.terms.flow > 0.0);
    CHECK(u.terms.sc > 0.0);
    CHECK(u.terms.sg > 0.0);
    CHECK(std::abs(u.terms.flow + 0.7 * u.terms.sc + 0.3 * u.terms.sg - u.terms.total) < 1e-12);
  }

  SUBCASE("guidance gradient scales linearly with its weight") {
    LossWeights w0, w1, w2;
    w0.lambda_g = 0.0;
    w1.lambda_g = 0.2;
    w2.lambda_g = 0.4;
    const auto g0 = student_gradient(net, teacher, batch, w0);
    const auto g1 = student_gradient(net, teacher, batch, w1);
    const auto g2 = student_gradient(net, teacher, batch, w2);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) {
      worst = std::max(worst, std::abs((g2[i] - g0[i]) - 2.0 * (g1[i] - g0[i])));
      scale = std::max(scale, std::abs(g1[i] - g0[i]));
    }
    CHECK(scale > 0.0);
    CHECK(worst <= 1e-12 * std::max(1.0, scale));
  }

  SUBCASE("weights validation") {
    LossWeights w;
    w.p_sc = 1.5;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    CHECK(loss_weights_from_json(to_json(LossWeights{}), "loss").lambda_g == 0.05);
  }
}
