#include "ofp/verify.hpp"

#include <cmath>
#include <sstream>

#include "ofp/autodiff/grad_check.hpp"
#include "ofp/losses.hpp"
#include "ofp/oracles.hpp"
#include "ofp/rng.hpp"
#include "ofp/sampler.hpp"

namespace ofp {

Json to_json(const Verification& v) {
  return Json{{"name", v.name},           {"passed", v.passed}, {"measured", v.measured},
              {"threshold", v.threshold}, {"detail", v.detail}, {"data", v.data}};
}

Verification verification_from_json(const Json& j) {
  Verification v;
  v.name = j.at("name").get<std::string>();
  v.passed = j.at("passed").get<bool>();
  v.measured = j.at("measured").get<double>();
  v.threshold = j.at("threshold").get<double>();
  v.detail = j.at("detail").get<std::string>();
  v.data = j.value("data", Json::object());
  return v;
}

Verification verify_prop1_identity(int trials, std::uint64_t seed, int dim) {
  Verification out;
  out.name = "consistency_target_error_identity";
  out.threshold = 1e-12;
  Rng rng(seed, 0xa1);
  const auto d = static_cast<std::size_t>(dim);
  double worst = 0.0;
  long bound_violations = 0;
  double worst_bound_excess = -1.0;
  for (int i = 0; i < trials; ++i) {
    Chunk a(d), eps(d), delta(d);
    rng.fill_normal(a);
    rng.fill_normal(eps);
    const double scale = std::pow(10.0, rng.uniform(-3.0, 0.0));
    for (double& v : delta) v = scale * rng.normal();
    TimeTriple tt;
    // r - t >= 0.01: below that the 1/(r - t) in the target magnifies the
    // rounding of z_m - z_t past the 1e-12 tolerance.
    tt.t = 0.99 * rng.uniform();
    tt.r = tt.t + 0.01 + (0.99 - tt.t) * rng.uniform();
    tt.m = tt.t + (tt.r - tt.t) * rng.uniform();

    Chunk velocity(d);
    for (std::size_t j = 0; j < d; ++j) velocity[j] = a[j] - eps[j];
    const LinearPathField teacher(velocity, delta);
    const ad::Tensor z_t = ad::Tensor::row(ot_interpolate(eps, a, tt.t));
    const ad::Tensor z_m = ad::Tensor::row(ot_interpolate(eps, a, tt.m));
    const ad::Tensor target =
        consistency_target(teacher, z_m, z_t, {tt}, CondBatch::all_null(1, 1));

    const double coef = (tt.r - tt.m) / (tt.r - tt.t);
    double err_sq = 0.0, delta_sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = target.data[j] - velocity[j];
      worst = std::max(worst, std::abs(dev - coef * delta[j]));
      err_sq += dev * dev;
      delta_sq += delta[j] * delta[j];
    }
    const double excess = std::sqrt(err_sq) - std::sqrt(delta_sq);
    worst_bound_excess = std::max(worst_bound_excess, excess);
    // Rounding in the target can exceed |delta| by a few ulps when m = t.
    if (excess > 1e-12) ++bound_violations;
  }
  out.measured = worst;
  out.passed = worst < out.threshold && bound_violations == 0;
  std::ostringstream ss;
  ss << trials << " trials, max identity residual " << worst << ", bound violations "
     << bound_violations;
  out.detail = ss.str();
  out.data = {{"trials", trials},
              {"bound_violations", bound_violations},
              {"max_bound_excess", worst_bound_excess}};
  return out;
}

ExactFlow1D two_atom_exact_flow(double max_step) {
  auto field = std::make_shared<TwoAtomIntervalField>(max_step);
  return ExactFlow1D{
      [max_step](double z, double t, double m) { return two_atom_flow(z, t, m, max_step); },
      [field](double z, double t, double r) { return field->interval_velocity(z, t, r); }};
}

ExactFlow1D single_datum_exact_flow(double a) {
  return ExactFlow1D{[a](double z, double t, double m) { return z + (m - t) * (a - z) / (1.0 - t); },
                     [a](double z, double t, double) { return (a - z) / (1.0 - t); }};
}

Verification verify_meanflow_fd(const ExactFlow1D& oracle, const FdOptions& o) {
  Verification out;
  out.name = "meanflow_finite_difference";
  out.threshold = o.ratio_high;
  const double u_t = oracle.u(o.z_t, o.t, o.r);
  std::vector<double> gaps, errors, ratios;
  bool finite = std::isfinite(u_t);
  for (int k = 0; k < o.halvings; ++k) {
    const double gap = o.first_gap * std::ldexp(1.0, -k);
    const double m = o.t + gap;
    const double h = o.derivative_step;
    auto along = [&](double s) { return oracle.u(oracle.flow(o.z_t, o.t, s), s, o.r); };
    const double q = (along(m) - u_t) / gap;
    const double du_dm = (along(m + h) - along(m - h)) / (2.0 * h);
    const double e = std::abs(q - (o.r - m) / (o.r - o.t) * du_dm);
    finite = finite && std::isfinite(e);
    gaps.push_back(gap);
    errors.push_back(e);
    if (k > 0) ratios.push_back(errors[k - 1] > 0.0 ? e / errors[k - 1] : 0.0);
  }
  out.data = {{"gaps", gaps}, {"errors", errors}, {"ratios", ratios}};

  if (!finite) {
    out.detail = "oracle integration produced a non-finite value";
    return out;
  }
  const double max_error = *std::max_element(errors.begin(), errors.end());
  if (max_error < 1e-12) {
    // Straight trajectories: the quantity vanishes identically.
    out.passed = true;
    out.measured = max_error;
    out.detail = "zero curvature, all errors below 1e-12";
    return out;
  }
  bool ok = static_cast<int>(ratios.size()) >= o.checked_ratios;
  double worst = 0.0;
  for (std::size_t i = ratios.size() - std::min<std::size_t>(ratios.size(), o.checked_ratios);
       i < ratios.size(); ++i) {
    ok = ok && ratios[i] >= o.ratio_low && ratios[i] <= o.ratio_high;
    worst = std::max(worst, std::abs(ratios[i] - 0.5));
  }
  out.measured = ratios.empty() ? 0.0 : ratios.back();
  out.passed = ok;
  std::ostringstream ss;
  ss << "error ratios per halving:";
  for (double r : ratios) ss << ' ' << r;
  ss << "; largest deviation from 0.5 over the last " << o.checked_ratios << ": " << worst;
  out.detail = ss.str();
  return out;
}

Verification verify_grad_alignment(const IntervalVelocityNet& net, const ParamStore& teacher_params,
                                   const AlignmentSample& s, double t, double t_prime,
                                   double tolerance, double abs_floor) {
  if (!(t_prime > 0.0 && t_prime < 1.0)) throw std::invalid_argument("t' must lie in (0, 1)");
  if (!(t >= 0.0 && t < 1.0)) throw std::invalid_argument("t must lie in [0, 1)");
  GuidanceBatch b;
  b.a = ad::Tensor::row(s.a);
  b.eps0 = ad::Tensor::row(s.eps0);
  b.eps1 = ad::Tensor::row(s.eps1);
  b.obs = ad::Tensor::row(s.obs);
  b.t = {t};
  b.t_prime = {t_prime};

  // g1: gradient of |f - sg(f - delta)|^2.
  ad::Tape tape;
  const auto student = net.params().bind(tape, true);
  const auto teacher = teacher_params.bind(tape, false);
  const GuidanceParts parts = self_guidance(tape, NetExpr(net, student), NetExpr(net, teacher), b);
  const std::vector<double> g1 = net.params().flat_gradient(tape.backward(parts.loss), student);
  const ad::Tensor delta = tape.value(parts.delta);

  // J^T delta through the backward pass of <f, delta>.
  ad::Tape vjp_tape;
  const auto student2 = net.params().bind(vjp_tape, true);
  IntervalQuery q;
  q.z = ad::Tensor::row(ot_interpolate(s.eps0, s.a, t));
  q.t = {t};
  q.r = {1.0};
  q.cond = CondBatch::real(b.obs);
  const ad::Var f = net.forward(vjp_tape, student2, q);
  const ad::Var inner = ad::sum(ad::mul(f, vjp_tape.constant(delta)));
  const std::vector<double> vjp = net.params().flat_gradient(vjp_tape.backward(inner), student2);

  const double c = t_prime * t_prime * (1.0 - t) / (1.0 - t_prime);
  double worst = 0.0;
  double g_max = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    const double lhs = c * vjp[i];
    const double rhs = 0.5 * c * g1[i];
    worst = std::max(worst, ad::relative_error(lhs, rhs, abs_floor));
    g_max = std::max(g_max, std::abs(rhs));
  }
  Verification out;
  out.name = "guidance_gradient_alignment";
  out.measured = worst;
  out.threshold = tolerance;
  out.passed = worst <= tolerance;
  std::ostringstream ss;
  ss << "t=" << t << " t'=" << t_prime << " factor=" << 0.5 * c << " max rel err " << worst;
  out.detail = ss.str();
  out.data = {{"t", t}, {"t_prime", t_prime}, {"factor", 0.5 * c}, {"max_abs_gradient", g_max}};
  return out;
}

Verification verify_grad_alignment_sweep(const NetConfig& config, int pairs, std::uint64_t seed) {
  IntervalVelocityNet net(config);
  NetConfig teacher_config = config;
  teacher_config.seed = config.seed + 1;
  const IntervalVelocityNet teacher(teacher_config);
  Rng rng(seed, 0xc3);
  const auto d = static_cast<std::size_t>(config.chunk_dim());
  double worst = 0.0;
  int failures = 0;
  for (int i = 0; i < pairs; ++i) {
    AlignmentSample s{std::vector<double>(d), std::vector<double>(d), std::vector<double>(d),
                      std::vector<double>(static_cast<std::size_t>(config.obs_dim))};
    rng.fill_normal(s.a);
    rng.fill_normal(s.eps0);
    rng.fill_normal(s.eps1);
    for (double& v : s.obs) v = rng.uniform(-1.0, 1.0);
    const double t = rng.uniform(0.0, 1.0);
    const double tp = rng.uniform(0.05, 0.95);
    const Verification v = verify_grad_alignment(net, teacher.params(), s, t, tp);
    worst = std::max(worst, v.measured);
    failures += v.passed ? 0 : 1;
  }
  Verification out;
  out.name = "guidance_gradient_alignment_sweep";
  out.measured = worst;
  out.threshold = 1e-6;
  out.passed = failures == 0;
  out.detail = std::to_string(pairs) + " random (t, t') pairs, " + std::to_string(failures) +
               " failures, worst rel err " + std::to_string(worst);
  out.data = {{"pairs", pairs}, {"failures", failures}};
  return out;
}

namespace {

TrainBatch small_batch(Rng& rng, std::size_t d, std::size_t o) {
  auto fill = [&](ad::Tensor& t, std::size_t rows, std::size_t cols) {
    t = ad::Tensor({rows, cols});
    rng.fill_normal(t.data);
  };
  TrainBatch b;
  fill(b.flow.a, 3, d);
  fill(b.flow.eps, 3, d);
  b.flow.t = {0.1, 0.5, 0.9};
  fill(b.flow.cond.obs, 3, o);
  b.flow.cond.null = {0, 1, 0};

  fill(b.consistency.a, 2, d);
  fill(b.consistency.eps, 2, d);
  b.consistency.times = {{0.2, 0.7, 0.4}, {0.05, 0.9, 0.6}};
  fill(b.consistency.cond.obs, 2, o);
  b.consistency.cond.null = {0, 1};

  fill(b.guidance.a, 2, d);
  fill(b.guidance.eps0, 2, d);
  fill(b.guidance.eps1, 2, d);
  fill(b.guidance.obs, 2, o);
  b.guidance.t = {0.3, 0.6};
  b.guidance.t_prime = {0.4, 0.8};
  return b;
}

}  // namespace

Verification verify_unified_gradient(std::uint64_t seed, double tolerance) {
  NetConfig cfg;
  cfg.action_dim = 2;
  cfg.horizon = 2;
  cfg.obs_dim = 2;
  cfg.hidden_width = 8;
  cfg.depth = 2;
  cfg.time_embed_dim = 4;
  cfg.seed = seed;
  IntervalVelocityNet net(cfg);
  NetConfig tcfg = cfg;
  tcfg.seed = seed + 1;
  const IntervalVelocityNet teacher(tcfg);
  Rng rng(seed, 0x9c);
  const TrainBatch batch = small_batch(rng, static_cast<std::size_t>(cfg.chunk_dim()),
                                       static_cast<std::size_t>(cfg.obs_dim));
  LossWeights w;
  w.lambda_c = 0.7;
  w.lambda_g = 0.3;

  auto refs = net.params().refs();
  const ad::LossBuilder build = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
    const auto tv = teacher.params().bind(tape, false);
    return unified_loss(tape, NetExpr(net, vars), NetExpr(net, tv), batch, w).total;
  };
  ad::GradCheckOptions opts;
  opts.tolerance = tolerance;
  const ad::GradCheckReport rep = ad::grad_check(build, refs, opts);

  Verification out;
  out.name = "unified_loss_gradient";
  out.measured = rep.max_rel_error;
  out.threshold = tolerance;
  out.passed = rep.passed;
  std::string worst_block;
  for (const auto& b : rep.blocks) {
    if (b.max_rel_error == rep.max_rel_error) worst_block = b.name;
  }
  out.detail = std::to_string(rep.coordinates) + " coordinates, worst block " + worst_block;
  out.data = {{"coordinates", rep.coordinates}};
  return out;
}

Verification verify_exact_solver(std::uint64_t seed, const std::vector<int>& grids) {
  Rng rng(seed, 0x5e);
  const std::size_t d = 6, n = 64;
  Chunk a(d);
  rng.fill_normal(a);
  const SingleDatumField field(a);
  ad::Tensor eps({n, d});
  rng.fill_normal(eps.data);
  const CondBatch cond = CondBatch::all_null(n, 1);

  auto max_dev = [&](const ad::Tensor& x) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) worst = std::max(worst, std::abs(x.at(i, j) - a[j]));
    }
    return worst;
  };
  double worst = max_dev(one_step_sample(field, cond, eps));
  Json per_grid = Json::object();
  per_grid["one_step"] = worst;
  for (int k : grids) {
    const double dev = max_dev(multi_step_sample(field, cond, eps, TimeGrid::uniform(k)));
    per_grid["K=" + std::to_string(k)] = dev;
    worst = std::max(worst, dev);
  }
  // A non-uniform grid as well.
  TimeGrid skewed{{0.0, 0.01, 0.1, 0.35, 0.8, 0.999, 1.0}};
  const double dev = max_dev(multi_step_sample(field, cond, eps, skewed));
  per_grid["skewed"] = dev;
  worst = std::max(worst, dev);

  Verification out;
  out.name = "exact_interval_solver";
  out.measured = worst;
  out.threshold = 1e-12;
  out.passed = worst <= 1e-12;
  out.detail = "max |sample - a| over one-step and K-step grids";
  out.data = per_grid;
  return out;
}

std::vector<Verification> run_all_verifications(std::uint64_t seed) {
  std::vector<Verification> out;
  out.push_back(verify_prop1_identity(100000, seed));
  out.push_back(verify_grad_alignment_sweep(NetConfig{}, 100, seed));
  out.push_back(verify_meanflow_fd(two_atom_exact_flow()));
  Verification straight = verify_meanflow_fd(single_datum_exact_flow(0.7));
  straight.name = "meanflow_finite_difference_straight";
  out.push_back(straight);
  out.push_back(verify_unified_gradient(seed));
  out.push_back(verify_exact_solver(seed));
  return out;
}

}  // namespace ofp
