#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ofp/json_util.hpp"
#include "ofp/net.hpp"

namespace ofp {

struct Verification {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
  Json data = Json::object();
};

Json to_json(const Verification& v);
Verification verification_from_json(const Json& j);

// Consistency target built from a teacher with a constant injected error delta
// on one straight path. Checks target - u = ((r - m) / (r - t)) delta and
// |target - u| <= |delta| over random (t, m, r, delta).
Verification verify_prop1_identity(int trials, std::uint64_t seed, int dim = 4);

// One-dimensional exact flow: flow(z, t, m) transports z from t to m and
// u(z, t, r) is the average velocity over [t, r].
struct ExactFlow1D {
  std::function<double(double, double, double)> flow;
  std::function<double(double, double, double)> u;
};

ExactFlow1D two_atom_exact_flow(double max_step = 1e-4);
ExactFlow1D single_datum_exact_flow(double a);

struct FdOptions {
  double t = 0.2;
  double r = 0.8;
  double z_t = 0.3;
  double first_gap = 0.2;  // m_0 - t
  int halvings = 8;
  double derivative_step = 1e-4;
  double ratio_low = 0.35;
  double ratio_high = 0.65;
  int checked_ratios = 3;  // trailing error ratios that must fall in the band
};

// e_k = |[u(z_m, m, r) - u(z_t, t, r)] / (m - t) - ((r - m) / (r - t)) du/dm|
// with m - t = first_gap 2^-k, z_m on the exact trajectory through z_t, and
// du/dm the central difference of u(z_m, m, r) along that trajectory.
Verification verify_meanflow_fd(const ExactFlow1D& oracle, const FdOptions& options = {});

struct AlignmentSample {
  std::vector<double> a;
  std::vector<double> eps0;
  std::vector<double> eps1;
  std::vector<double> obs;
};

// Per-coordinate comparison of (t'^2 (1-t) / (1-t')) J^T delta against
// (t'^2 (1-t) / (2 (1-t'))) grad L_sg for one fixed sample; the teacher uses
// `teacher_params`.
Verification verify_grad_alignment(const IntervalVelocityNet& net, const ParamStore& teacher_params,
                                   const AlignmentSample& sample, double t, double t_prime,
                                   double tolerance = 1e-6, double abs_floor = 1e-12);

// verify_grad_alignment over `pairs` random (t, t') with t' in [0.05, 0.95].
Verification verify_grad_alignment_sweep(const NetConfig& config, int pairs, std::uint64_t seed);

// Central-difference check of the full unified loss on a small network.
Verification verify_unified_gradient(std::uint64_t seed, double tolerance = 1e-4);

// One-step and K-step interval sampling with the exact field of a
// single-datum dataset.
Verification verify_exact_solver(std::uint64_t seed, const std::vector<int>& grids = {1, 2, 3, 4, 7, 16});

// Runs every check with the standard settings.
std::vector<Verification> run_all_verifications(std::uint64_t seed);

}  // namespace ofp
