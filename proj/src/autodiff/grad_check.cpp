#include "ofp/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ofp::ad {

double relative_error(double analytic, double numeric, double abs_floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

std::vector<Var> bind(Tape& tape, std::span<const ParamRef> params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.view(p.values, p.shape, true));
  return vars;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, std::span<const ParamRef> params,
                           const GradCheckOptions& options) {
  Tape base;
  const std::vector<Var> vars = bind(base, params);
  const Var loss = build(base, vars);
  const Gradients grads = base.backward(loss);
  const std::vector<Tensor> frozen = base.stop_gradient_values();

  auto evaluate = [&]() {
    Tape tape(frozen);
    const std::vector<Var> v = bind(tape, params);
    return tape.scalar(build(tape, v));
  };

  GradCheckReport report;
  for (std::size_t b = 0; b < params.size(); ++b) {
    const ParamRef& p = params[b];
    const std::vector<double> analytic = grads.of(vars[b]);
    BlockCheck check;
    check.name = p.name;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double saved = p.values[i];
      p.values[i] = saved + options.step;
      const double up = evaluate();
      p.values[i] = saved - options.step;
      const double down = evaluate();
      p.values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[i], numeric, options.abs_floor);
      if (i == 0 || err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.analytic = analytic[i];
        check.numeric = numeric;
      }
      ++report.coordinates;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.blocks.push_back(std::move(check));
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace ofp::ad
