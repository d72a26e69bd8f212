#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ofp/autodiff/tape.hpp"

namespace ofp::ad {

// A named, mutable parameter block handed to the gradient checker.
struct ParamRef {
  std::string name;
  Shape shape;
  std::span<double> values;
};

// Builds a scalar loss on `tape`; `params[i]` is the tracked leaf for block i.
// Must be deterministic: it is called once for the analytic gradient and twice
// per perturbed coordinate.
using LossBuilder = std::function<Var(Tape& tape, const std::vector<Var>& params)>;

struct GradCheckOptions {
  double step = 1e-5;
  double abs_floor = 1e-8;
  double tolerance = 1e-4;
};

struct BlockCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = true;
};

// Compares reverse-mode gradients with central differences. Stop-gradient
// outputs from the unperturbed pass are replayed in every perturbed pass, so a
// stop-gradient branch is frozen in the numeric oracle as well.
GradCheckReport grad_check(const LossBuilder& build, std::span<const ParamRef> params,
                           const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double abs_floor);

}  // namespace ofp::ad
