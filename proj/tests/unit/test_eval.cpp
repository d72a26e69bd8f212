#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ofp/eval.hpp"
#include "ofp/oracles.hpp"
#include "ofp/verify.hpp"

using namespace ofp;
namespace fs = std::filesystem;

namespace {

ad::Tensor randn(Rng& rng, std::size_t rows, std::size_t cols) {
  ad::Tensor t({rows, cols});
  rng.fill_normal(t.data);
  return t;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

NetConfig small_net() {
  NetConfig c;
  c.action_dim = 2;
  c.horizon = 2;
  c.obs_dim = 2;
  c.hidden_width = 16;
  c.depth = 2;
  c.time_embed_dim = 8;
  c.seed = 8;
  return c;
}

}  // namespace

TEST_CASE("energy distance") {
  Rng rng(1);
  const ad::Tensor x = randn(rng, 50, 3);
  CHECK(energy_distance(x, x) == doctest::Approx(0.0).epsilon(1e-12));

  const ad::Tensor p = ad::Tensor::matrix(1, 2, {0.0, 0.0});
  const ad::Tensor q = ad::Tensor::matrix(1, 2, {3.0, 4.0});
  CHECK(energy_distance(p, q) == doctest::Approx(10.0));

  for (int k = 0; k < 10; ++k) {
    const ad::Tensor a = randn(rng, 20 + k, 2);
    ad::Tensor b = randn(rng, 30, 2);
    for (double& v : b.data) v += 0.3 * k;
    const double ab = energy_distance(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(energy_distance(b, a)).epsilon(1e-12));
  }

  const ad::Tensor n1 = randn(rng, 10000, 1);
  const ad::Tensor n2 = randn(rng, 10000, 1);
  CHECK(energy_distance(n1, n2) < 0.01);

  CHECK_THROWS_AS(energy_distance(randn(rng, 3, 2), randn(rng, 3, 1)), std::invalid_argument);
  CHECK_THROWS_AS(energy_distance(ad::Tensor({0, 2}), randn(rng, 3, 2)), std::invalid_argument);
}

TEST_CASE("appendix A identity check") {
  const Verification v = verify_prop1_identity(20000, 3);
  CHECK(v.passed);
  CHECK(v.measured < 1e-12);
  const Verification again = verify_prop1_identity(20000, 3);
  CHECK(again.measured == v.measured);
}

TEST_CASE("finite-difference convergence check") {
  SUBCASE("straight trajectories give zero") {
    const Verification v = verify_meanflow_fd(single_datum_exact_flow(0.7));
    CHECK(v.passed);
    CHECK(v.measured < 1e-12);
  }

  SUBCASE("two atoms converge at first order") {
    const Verification v = verify_meanflow_fd(two_atom_exact_flow());
    CHECK(v.passed);
    const auto errors = v.data.at("errors").get<std::vector<double>>();
    const auto ratios = v.data.at("ratios").get<std::vector<double>>();
    for (std::size_t k = 2; k < errors.size(); ++k) CHECK(errors[k] < errors[k - 1]);
    CHECK(std::abs(ratios.back() - 0.5) < 0.05);
  }
}

TEST_CASE("guidance gradient alignment") {
  const IntervalVelocityNet net(small_net());
  NetConfig tc = small_net();
  tc.seed = 9;
  const IntervalVelocityNet teacher(tc);
  const AlignmentSample s{{0.3, -0.2, 0.5, 1.0}, {0.1, 0.4, -0.3, 0.9}, {1.2, -0.7, 0.0, 0.3}, {0.5, -0.5}};

  const Verification v = verify_grad_alignment(net, teacher.params(), s, 0.2, 0.5);
  CHECK(v.passed);
  CHECK(v.data.at("factor").get<double>() == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(v.data.at("max_abs_gradient").get<double>() > 0.0);

  ParamStore zero = teacher.params();
  std::fill(zero.values().begin(), zero.values().end(), 0.0);
  const Verification z = verify_grad_alignment(net, zero, s, 0.2, 0.5);
  CHECK(z.passed);
  CHECK(z.data.at("max_abs_gradient").get<double>() == 0.0);

  CHECK_THROWS_AS(verify_grad_alignment(net, teacher.params(), s, 0.2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(verify_grad_alignment(net, teacher.params(), s, 0.2, 0.0), std::invalid_argument);

  const Verification sweep = verify_grad_alignment_sweep(small_net(), 20, 4);
  CHECK(sweep.passed);
  CHECK(verify_grad_alignment_sweep(small_net(), 20, 4).measured == sweep.measured);
}

TEST_CASE("unified gradient and exact solver checks") {
  CHECK(verify_unified_gradient(1).passed);
  const Verification e = verify_exact_solver(2);
  CHECK(e.passed);
  CHECK(e.measured < 1e-12);
}

TEST_CASE("generation helpers") {
  const Chunk a{0.3, -0.6};
  SingleDatumField field(a);
  Rng rng(5);
  const ad::Tensor eps = randn(rng, 4, 2);
  const CondBatch cond = CondBatch::all_null(4, 1);
  for (auto kind : {SamplerKind::kInterval, SamplerKind::kEuler}) {
    CHECK(sampler_kind_from_name(sampler_kind_name(kind)) == kind);
    for (int steps : {1, 3}) {
      CountingField counted(field);
      const ad::Tensor x = generate(counted, kind, cond, eps, steps);
      CHECK(counted.calls() == steps);
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(x.at(i, j) - a[j]) < 1e-12);
      }
      const ad::Tensor prior = randn(rng, 4, 2);
      const ad::Tensor w = generate_warm(field, kind, cond, eps, prior, 0.15, steps);
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(w.at(i, j) - a[j]) < 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(sampler_kind_from_name("heun"), std::invalid_argument);

  const IntervalVelocityNet net(small_net());
  const NetField nf(net, net.params());
  CHECK(chunk_latency_ms(nf, SamplerKind::kInterval, {0.1, 0.2}, 4, 2, 3, 1) > 0.0);
}

TEST_CASE("eval config") {
  EvalConfig c;
  c.nfe_list = {};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const EvalConfig back = eval_config_from_json(to_json(EvalConfig{}), "eval");
  CHECK(back.nfe_list == std::vector<int>{1, 4, 100});
  CHECK(back.t_w == 0.15);
}

TEST_CASE("reports") {
  Report r;
  r.run_id = "run";
  r.config_hash = "abc";
  r.seed = 7;
  r.checkpoint = "ckpt";
  r.metrics = {{"expert_energy_distance", 0.125}};
  r.cells = {ReportCell{1, false, {{"energy_distance", 0.1 + 0.2}}},
             ReportCell{4, true, {{"energy_distance", 1.0 / 3.0}}}};
  Verification v;
  v.name = "x";
  v.passed = true;
  v.measured = 1e-13;
  v.threshold = 1e-12;
  r.verifications = {v};
  CHECK(r.all_passed());

  SUBCASE("json round trip") {
    const Json j = to_json(r);
    const Report back = report_from_json(Json::parse(j.dump()));
    CHECK(to_json(back) == j);
    CHECK(back.cells[1].metrics.at("energy_distance") == 1.0 / 3.0);
  }

  SUBCASE("csv layout") {
    const std::string csv = report_csv(r);
    CHECK(csv.rfind(std::string(kReportCsvHeader) + "\n", 0) == 0);
    CHECK(count(csv, "\n") == 1 + 1 + 2 + 3);
    CHECK(csv.find("cell,nfe4_warm,4,on,energy_distance,") != std::string::npos);
  }

  SUBCASE("svg point count") {
    Scatter s;
    Rng rng(6);
    for (int i = 0; i < 37; ++i) s.generated.push_back({rng.normal(), rng.normal()});
    for (int i = 0; i < 23; ++i) s.expert.push_back({rng.normal(), rng.normal()});
    CHECK(count(scatter_svg(s), "<circle") == 60);
  }

  SUBCASE("emit") {
    const fs::path dir = fs::temp_directory_path() / "ofp_eval_emit";
    fs::remove_all(dir);
    Scatter s;
    s.generated = {{0, 0}};
    emit_report(dir, r, &s);
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(fs::exists(dir / "scatter.svg"));
  }
}
