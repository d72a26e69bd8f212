#include <doctest.h>

#include <cmath>

#include "ofp/oracles.hpp"
#include "ofp/sampler.hpp"

using namespace ofp;

namespace {

ad::Tensor randn(Rng& rng, std::size_t rows, std::size_t cols) {
  ad::Tensor t({rows, cols});
  rng.fill_normal(t.data);
  return t;
}

double max_row_error(const ad::Tensor& x, const Chunk& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(x.at(i, j) - a[j]));
  }
  return worst;
}

NetConfig small_net() {
  NetConfig c;
  c.action_dim = 2;
  c.horizon = 4;
  c.obs_dim = 3;
  c.hidden_width = 16;
  c.depth = 2;
  c.time_embed_dim = 8;
  c.seed = 2;
  return c;
}

}  // namespace

TEST_CASE("time grid") {
  const TimeGrid g = TimeGrid::uniform(4);
  CHECK(g.steps() == 4);
  CHECK(g.taus.front() == 0.0);
  CHECK(g.taus.back() == 1.0);
  CHECK(g.taus[2] == 0.5);
  CHECK_THROWS(TimeGrid::uniform(0));
  CHECK_THROWS(TimeGrid{{0.0, 0.5, 0.5, 1.0}}.validate());
  CHECK_THROWS(TimeGrid{{0.0, 0.7}}.validate());
  CHECK_THROWS(TimeGrid{{0.1, 1.0}}.validate());
}

TEST_CASE("exact interval field") {
  const Chunk a{0.4, -1.1, 2.5, 0.0};
  SingleDatumField field(a);
  Rng rng(1);
  const ad::Tensor eps = randn(rng, 8, 4);
  const CondBatch cond = CondBatch::all_null(8, 1);

  CountingField counted(field);
  const ad::Tensor one = one_step_sample(counted, cond, eps);
  CHECK(counted.calls() == 1);
  CHECK(max_row_error(one, a) < 1e-12);

  CHECK(multi_step_sample(field, cond, eps, TimeGrid::uniform(1)).data == one.data);

  for (int k : {2, 3, 5, 16}) {
    CountingField c2(field);
    CHECK(max_row_error(multi_step_sample(c2, cond, eps, TimeGrid::uniform(k)), a) < 1e-12);
    CHECK(c2.calls() == k);
    CHECK(max_row_error(euler_sample(field, cond, eps, TimeGrid::uniform(k)), a) < 1e-12);
  }
  const TimeGrid skewed{{0.0, 0.01, 0.3, 0.31, 0.9, 1.0}};
  CHECK(max_row_error(multi_step_sample(field, cond, eps, skewed), a) < 1e-12);
}

TEST_CASE("warm prior") {
  // H = 4, h = 2, action_dim = 1
  CHECK(build_warm_prior({1, 2, 3, 4}, 2, 1) == Chunk{3, 4, 4, 4});
  CHECK(build_warm_prior({1, 2, 3, 4}, 3, 1) == Chunk{4, 4, 4, 4});
  CHECK(build_warm_prior({1, 10, 2, 20, 3, 30}, 1, 2) == Chunk{2, 20, 3, 30, 3, 30});
  CHECK(build_warm_prior(Chunk(8, 0.5), 2, 2) == Chunk(8, 0.5));
  CHECK_THROWS_AS(build_warm_prior({1, 2, 3, 4}, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_warm_prior({1, 2, 3, 4}, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_warm_prior({1, 2, 3}, 1, 2), std::invalid_argument);
}

TEST_CASE("warm-start sampling") {
  const IntervalVelocityNet net(small_net());
  const NetField field(net, net.params());
  Rng rng(3);
  const Chunk eps = [&] {
    Chunk e(8);
    rng.fill_normal(e);
    return e;
  }();
  const std::vector<double> obs{0.1, -0.3, 0.7};
  const Chunk prev{1, 2, 3, 4, 5, 6, 7, 8};

  const ad::Tensor cold = one_step_sample(field, CondBatch::repeat(obs, 1), ad::Tensor::row(eps));

  WarmState w;
  w.exec_horizon = 2;
  w.t_w = 0.0;
  w.prev_chunk = prev;
  CHECK(warm_start_sample(field, obs, eps, w, 2) == cold.data);

  w.t_w = 1.0;
  CHECK(warm_start_sample(field, obs, eps, w, 2) == build_warm_prior(prev, 2, 2));

  WarmState none;
  none.t_w = 0.15;
  CHECK(warm_start_sample(field, obs, eps, none, 2) == cold.data);

  w.t_w = 0.15;
  net.reset_forward_count();
  const Chunk x = warm_start_sample(field, obs, eps, w, 2);
  CHECK(net.forward_count() == 1);
  CHECK(warm_start_sample(field, obs, eps, w, 2) == x);

  // matches the closed form z + (1 - t_w) u(z, t_w, 1)
  const Chunk warm = build_warm_prior(prev, 2, 2);
  std::vector<double> z(8);
  for (std::size_t i = 0; i < 8; ++i) z[i] = 0.85 * eps[i] + 0.15 * warm[i];
  const auto u = net.forward_interval_velocity(z, 0.15, 1.0, obs, false);
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(x[i] - (z[i] + 0.85 * u[i])) < 1e-12);
}

TEST_CASE("network sampling accounting and determinism") {
  const IntervalVelocityNet net(small_net());
  const NetField field(net, net.params());
  Rng rng(4);
  const ad::Tensor eps = randn(rng, 16, 8);
  const CondBatch cond = CondBatch::real(randn(rng, 16, 3));
  for (int k : {1, 4, 100}) {
    net.reset_forward_count();
    const ad::Tensor x = multi_step_sample(field, cond, eps, TimeGrid::uniform(k));
    CHECK(net.forward_count() == static_cast<std::uint64_t>(k));
    CHECK(multi_step_sample(field, cond, eps, TimeGrid::uniform(k)).data == x.data);
  }
  net.reset_forward_count();
  one_step_sample(field, cond, eps);
  CHECK(net.forward_count() == 1);
}
