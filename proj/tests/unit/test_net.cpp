#include <doctest.h>

#include <cmath>
#include <vector>

#include "ofp/net.hpp"
#include "ofp/rng.hpp"

using namespace ofp;

namespace {

NetConfig small_config() {
  NetConfig c;
  c.action_dim = 2;
  c.horizon = 3;
  c.obs_dim = 3;
  c.hidden_width = 16;
  c.depth = 2;
  c.time_embed_dim = 8;
  c.seed = 5;
  return c;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("config validation") {
  NetConfig c = small_config();
  c.time_embed_dim = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.horizon = 0;
  CHECK_THROWS_AS(IntervalVelocityNet{c}, ConfigError);
  CHECK(net_config_from_json(to_json(small_config())).hidden_width == 16);
  CHECK_THROWS_AS(net_config_from_json(Json{{"width", 3}}), ConfigError);
}

TEST_CASE("forward contract") {
  const IntervalVelocityNet net(small_config());
  const std::vector<double> z{0.1, -0.2, 0.3, 0.0, 1.0, -1.0};
  const std::vector<double> o{0.5, -0.5, 0.2};
  for (double t : {0.0, 0.3, 1.0}) {
    const auto u = net.forward_interval_velocity(z, t, t, o, false);
    REQUIRE(u.size() == 6);
    for (double v : u) CHECK(std::isfinite(v));
  }
  CHECK(net.forward_interval_velocity(z, 0.2, 0.7, o, false) ==
        net.forward_interval_velocity(z, 0.2, 0.7, o, false));
  CHECK_THROWS_AS(net.forward_interval_velocity(z, 0.7, 0.2, o, false), std::invalid_argument);
  CHECK_THROWS_AS(net.forward_interval_velocity(z, -0.1, 0.2, o, false), std::invalid_argument);
  CHECK_THROWS_AS(net.forward_interval_velocity(z, 0.1, 1.2, o, false), std::invalid_argument);
  CHECK_THROWS_AS(net.forward_interval_velocity({1.0}, 0.1, 0.2, o, false), std::invalid_argument);
}

TEST_CASE("fresh network output norm is stable") {
  const IntervalVelocityNet net(small_config());
  const std::vector<double> z{0.1, -0.2, 0.3, 0.0, 1.0, -1.0};
  const double n = norm(net.forward_interval_velocity(z, 0.25, 0.75, {0.5, -0.5, 0.2}, false));
  // Captured from the deterministic initialization.
  CHECK(n == doctest::Approx(0.3882804605929549).epsilon(1e-12));
  const IntervalVelocityNet again(small_config());
  CHECK(again.params().values() == net.params().values());
}

TEST_CASE("batched forward equals per-row forward") {
  const IntervalVelocityNet net(small_config());
  Rng rng(9);
  IntervalQuery q;
  q.z = ad::Tensor({4, 6});
  rng.fill_normal(q.z.data);
  q.t = {0.0, 0.2, 0.5, 0.9};
  q.r = {1.0, 0.2, 0.7, 1.0};
  q.cond.obs = ad::Tensor({4, 3});
  rng.fill_normal(q.cond.obs.data);
  q.cond.null = {0, 1, 0, 1};
  const auto batch = net.evaluate(q);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::vector<double> zi(q.z.row_span(i).begin(), q.z.row_span(i).end());
    const std::vector<double> oi(q.cond.obs.row_span(i).begin(), q.cond.obs.row_span(i).end());
    const auto single = net.forward_interval_velocity(zi, q.t[i], q.r[i], oi, q.cond.null[i]);
    for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(single[j] - batch.at(i, j)) < 1e-12);
  }
}

TEST_CASE("condition encoding") {
  const IntervalVelocityNet net(small_config());
  const auto a = net.encode_condition({0.1, 0.2, 0.3}, true);
  const auto b = net.encode_condition({-5.0, 2.0, 9.0}, true);
  CHECK(a == b);
  CHECK(a.size() == 16);
  Rng rng(3);
  std::vector<double> o1(3), o2(3);
  rng.fill_normal(o1);
  rng.fill_normal(o2);
  CHECK(net.encode_condition(o1, false) != net.encode_condition(o2, false));
  CHECK(net.encode_condition(o1, false).size() == 16);
}

TEST_CASE("null-conditioned output does not depend on the observation") {
  const IntervalVelocityNet net(small_config());
  const std::vector<double> z{0.1, -0.2, 0.3, 0.0, 1.0, -1.0};
  std::vector<double> o{0.5, -0.5, 0.2};
  const double h = 1e-5;
  for (std::size_t k = 0; k < o.size(); ++k) {
    auto up = o, down = o;
    up[k] += h;
    down[k] -= h;
    const auto fu = net.forward_interval_velocity(z, 0.3, 0.6, up, true);
    const auto fd = net.forward_interval_velocity(z, 0.3, 0.6, down, true);
    for (std::size_t j = 0; j < fu.size(); ++j) CHECK((fu[j] - fd[j]) / (2 * h) == 0.0);
  }
}

TEST_CASE("forward counter counts calls") {
  const IntervalVelocityNet net(small_config());
  net.reset_forward_count();
  const std::vector<double> z(6, 0.0);
  for (int i = 0; i < 5; ++i) net.forward_interval_velocity(z, 0.0, 1.0, {0, 0, 0}, false);
  CHECK(net.forward_count() == 5);
  const IntervalVelocityNet copy = net;
  CHECK(copy.forward_count() == 5);
}

TEST_CASE("EMA schedule and update") {
  CHECK(ema_beta(0) == 0.0);
  double prev = -1.0;
  for (double e = 0.0; e <= 9.0; e += 0.05) {
    const long s = static_cast<long>(std::pow(10.0, e));
    const double b = ema_beta(s);
    CHECK(b >= prev);
    CHECK(b <= 0.9999);
    prev = b;
  }
  CHECK(ema_beta(1000000000L) == 0.9999);

  IntervalVelocityNet student(small_config());
  NetConfig other = small_config();
  other.seed = 99;
  const IntervalVelocityNet start(other);
  EmaTeacher t = EmaTeacher::from(start.params());
  t.update(student.params(), 0);
  CHECK(t.shadow.values() == student.params().values());
  CHECK(t.step_count == 1);

  EmaTeacher u = EmaTeacher::from(start.params());
  double last = 1e300;
  for (long s = 1; s < 200; ++s) {
    u.update(student.params(), s);
    double d = 0.0;
    for (std::size_t i = 0; i < u.shadow.size(); ++i) {
      d = std::max(d, std::abs(u.shadow.values()[i] - student.params().values()[i]));
    }
    CHECK(d <= last);
    last = d;
  }
  CHECK(last < 1e-3);

  NetConfig bigger = small_config();
  bigger.hidden_width = 8;
  EmaTeacher mismatched = EmaTeacher::from(IntervalVelocityNet(bigger).params());
  CHECK_THROWS_AS(mismatched.update(student.params(), 3), std::invalid_argument);
}
