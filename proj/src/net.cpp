#include "ofp/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ofp/rng.hpp"

namespace ofp {

void NetConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("net.") + name, "must be >= 1");
  };
  positive(action_dim, "action_dim");
  positive(horizon, "horizon");
  positive(obs_dim, "obs_dim");
  positive(hidden_width, "hidden_width");
  positive(depth, "depth");
  positive(time_embed_dim, "time_embed_dim");
  if (time_embed_dim % 2 != 0) throw ConfigError("net.time_embed_dim", "must be even");
}

Json to_json(const NetConfig& c) {
  return Json{{"action_dim", c.action_dim},   {"horizon", c.horizon},
              {"obs_dim", c.obs_dim},         {"hidden_width", c.hidden_width},
              {"depth", c.depth},             {"time_embed_dim", c.time_embed_dim},
              {"seed", c.seed}};
}

NetConfig net_config_from_json(const Json& j, const std::string& path) {
  NetConfig c;
  JsonReader r(j, path);
  r.get("action_dim", c.action_dim);
  r.get("horizon", c.horizon);
  r.get("obs_dim", c.obs_dim);
  r.get("hidden_width", c.hidden_width);
  r.get("depth", c.depth);
  r.get("time_embed_dim", c.time_embed_dim);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

CondBatch CondBatch::real(ad::Tensor obs) {
  CondBatch c;
  c.null.assign(obs.rows(), 0);
  c.obs = std::move(obs);
  return c;
}

CondBatch CondBatch::all_null(std::size_t rows, std::size_t obs_dim) {
  CondBatch c;
  c.obs = ad::Tensor({rows, obs_dim}, 0.0);
  c.null.assign(rows, 1);
  return c;
}

CondBatch CondBatch::repeat(const std::vector<double>& obs, std::size_t rows, bool is_null) {
  CondBatch c;
  c.obs = ad::Tensor({rows, obs.size()}, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy(obs.begin(), obs.end(), c.obs.row_span(i).begin());
  }
  c.null.assign(rows, is_null ? 1 : 0);
  return c;
}

CondBatch CondBatch::as_null() const {
  CondBatch c = *this;
  std::fill(c.null.begin(), c.null.end(), 1);
  return c;
}

void IntervalQuery::validate(std::size_t chunk_dim, std::size_t obs_dim) const {
  const std::size_t n = t.size();
  if (r.size() != n || z.shape != ad::Shape{n, chunk_dim} || cond.rows() != n ||
      cond.obs.shape != ad::Shape{n, obs_dim}) {
    throw std::invalid_argument("interval query shapes inconsistent: z " + ad::shape_string(z.shape) +
                                ", obs " + ad::shape_string(cond.obs.shape) + ", " +
                                std::to_string(n) + " times");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(t[i] >= 0.0 && t[i] <= r[i] && r[i] <= 1.0)) {
      throw std::invalid_argument("interval query row " + std::to_string(i) +
                                  " violates 0 <= t <= r <= 1 (t=" + std::to_string(t[i]) +
                                  ", r=" + std::to_string(r[i]) + ")");
    }
  }
}

std::vector<double> sinusoidal_embedding(double x, int dim) {
  const int half = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int k = 0; k < half; ++k) {
    const double exponent = half > 1 ? 4.0 * k / (half - 1) : 0.0;
    const double freq = std::pow(10.0, exponent);
    out[static_cast<std::size_t>(k)] = std::sin(x * freq);
    out[static_cast<std::size_t>(half + k)] = std::cos(x * freq);
  }
  return out;
}

IntervalVelocityNet::IntervalVelocityNet(const NetConfig& config) : config_(config) {
  config_.validate();
  build_layout();
  initialize();
}

IntervalVelocityNet::IntervalVelocityNet(const IntervalVelocityNet& other)
    : config_(other.config_),
      params_(other.params_),
      time_w_(other.time_w_),
      time_b_(other.time_b_),
      cond1_w_(other.cond1_w_),
      cond1_b_(other.cond1_b_),
      cond2_w_(other.cond2_w_),
      cond2_b_(other.cond2_b_),
      null_token_(other.null_token_),
      trunk_w_(other.trunk_w_),
      trunk_b_(other.trunk_b_),
      out_w_(other.out_w_),
      out_b_(other.out_b_),
      calls_(other.calls_.load()) {}

IntervalVelocityNet& IntervalVelocityNet::operator=(const IntervalVelocityNet& other) {
  if (this == &other) return *this;
  config_ = other.config_;
  params_ = other.params_;
  time_w_ = other.time_w_;
  time_b_ = other.time_b_;
  cond1_w_ = other.cond1_w_;
  cond1_b_ = other.cond1_b_;
  cond2_w_ = other.cond2_w_;
  cond2_b_ = other.cond2_b_;
  null_token_ = other.null_token_;
  trunk_w_ = other.trunk_w_;
  trunk_b_ = other.trunk_b_;
  out_w_ = other.out_w_;
  out_b_ = other.out_b_;
  calls_.store(other.calls_.load());
  return *this;
}

void IntervalVelocityNet::build_layout() {
  const auto w = static_cast<std::size_t>(config_.hidden_width);
  const auto e = static_cast<std::size_t>(config_.time_embed_dim);
  const auto d = static_cast<std::size_t>(config_.chunk_dim());
  const auto o = static_cast<std::size_t>(config_.obs_dim);

  time_w_ = params_.add("time_proj.weight", 2 * e, w);
  time_b_ = params_.add("time_proj.bias", 1, w);
  cond1_w_ = params_.add("cond.fc1.weight", o, w);
  cond1_b_ = params_.add("cond.fc1.bias", 1, w);
  cond2_w_ = params_.add("cond.fc2.weight", w, w);
  cond2_b_ = params_.add("cond.fc2.bias", 1, w);
  null_token_ = params_.add("cond.null_token", 1, w);
  std::size_t in = d + 2 * w;
  for (int l = 0; l < config_.depth; ++l) {
    const std::string prefix = "trunk." + std::to_string(l);
    trunk_w_.push_back(params_.add(prefix + ".weight", in, w));
    trunk_b_.push_back(params_.add(prefix + ".bias", 1, w));
    in = w;
  }
  out_w_ = params_.add("head.weight", w, d);
  out_b_ = params_.add("head.bias", 1, d);
}

void IntervalVelocityNet::initialize() {
  Rng rng(config_.seed, 0x1a17);
  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases use their layer's fan-in.
  std::size_t fan_in = 1;
  for (std::size_t i = 0; i < params_.blocks().size(); ++i) {
    const ParamBlock& b = params_.blocks()[i];
    if (i == null_token_) {
      fan_in = b.cols;
    } else if (!b.name.ends_with(".bias")) {
      fan_in = b.rows;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : params_.block(i)) v = rng.uniform(-bound, bound);
  }
}

ad::Var IntervalVelocityNet::encode_condition(ad::Tape& tape, const Bound& p,
                                              const CondBatch& cond) const {
  const std::size_t n = cond.rows();
  std::vector<double> keep(n), drop(n);
  bool any_real = false, any_null = false;
  for (std::size_t i = 0; i < n; ++i) {
    keep[i] = cond.null[i] ? 0.0 : 1.0;
    drop[i] = 1.0 - keep[i];
    any_real = any_real || !cond.null[i];
    any_null = any_null || cond.null[i];
  }

  ad::Var emb{};
  bool have = false;
  if (any_real) {
    ad::Tensor obs = cond.obs;
    for (std::size_t i = 0; i < n; ++i) {
      if (cond.null[i]) std::fill(obs.row_span(i).begin(), obs.row_span(i).end(), 0.0);
    }
    ad::Var x = tape.constant(std::move(obs));
    ad::Var h = ad::silu(ad::affine(x, p[cond1_w_], p[cond1_b_]));
    emb = ad::affine(h, p[cond2_w_], p[cond2_b_]);
    if (any_null) emb = ad::scale_rows(emb, keep);
    have = true;
  }
  if (any_null) {
    ad::Var mask = tape.constant(ad::Tensor({n, 1}, drop));
    ad::Var nulls = ad::matmul(mask, p[null_token_]);
    emb = have ? ad::add(emb, nulls) : nulls;
  }
  return emb;
}

ad::Var IntervalVelocityNet::forward(ad::Tape& tape, const Bound& p,
                                     const IntervalQuery& q) const {
  q.validate(static_cast<std::size_t>(config_.chunk_dim()),
             static_cast<std::size_t>(config_.obs_dim));
  calls_.fetch_add(1);
  const std::size_t n = q.rows();
  const auto e = static_cast<std::size_t>(config_.time_embed_dim);

  ad::Tensor times({n, 2 * e}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto et = sinusoidal_embedding(q.t[i], config_.time_embed_dim);
    const auto ed = sinusoidal_embedding(q.r[i] - q.t[i], config_.time_embed_dim);
    auto row = times.row_span(i);
    std::copy(et.begin(), et.end(), row.begin());
    std::copy(ed.begin(), ed.end(), row.begin() + static_cast<std::ptrdiff_t>(e));
  }
  ad::Var time_h = ad::silu(ad::affine(tape.constant(std::move(times)), p[time_w_], p[time_b_]));
  ad::Var cond_h = encode_condition(tape, p, q.cond);
  ad::Var z = tape.constant(q.z);

  ad::Var x = ad::concat_cols({z, cond_h, time_h});
  for (std::size_t l = 0; l < trunk_w_.size(); ++l) {
    x = ad::silu(ad::affine(x, p[trunk_w_[l]], p[trunk_b_[l]]));
  }
  return ad::affine(x, p[out_w_], p[out_b_]);
}

ad::Tensor IntervalVelocityNet::evaluate(const ParamStore& params, const IntervalQuery& q) const {
  if (!params.same_layout(params_)) throw std::invalid_argument("parameter layout mismatch");
  ad::Tape tape;
  const Bound bound = params.bind(tape, false);
  return tape.value(forward(tape, bound, q));
}

std::vector<double> IntervalVelocityNet::forward_interval_velocity(const std::vector<double>& z,
                                                                   double t, double r,
                                                                   const std::vector<double>& obs,
                                                                   bool use_null) const {
  IntervalQuery q;
  q.z = ad::Tensor::row(z);
  q.t = {t};
  q.r = {r};
  q.cond = CondBatch::repeat(obs, 1, use_null);
  return evaluate(q).data;
}

std::vector<double> IntervalVelocityNet::encode_condition(const std::vector<double>& obs,
                                                          bool use_null) const {
  ad::Tape tape;
  const Bound bound = params_.bind(tape, false);
  return tape.value(encode_condition(tape, bound, CondBatch::repeat(obs, 1, use_null))).data;
}

double ema_beta(long step, double beta_max, double power) {
  const double warm = 1.0 - std::pow(1.0 + static_cast<double>(step), -power);
  return std::min(beta_max, warm);
}

EmaTeacher EmaTeacher::from(const ParamStore& student, double beta_max, double power) {
  EmaTeacher t;
  t.shadow = student;
  t.beta_max = beta_max;
  t.power = power;
  return t;
}

void EmaTeacher::update(const ParamStore& student, long step) {
  if (!shadow.same_layout(student)) throw std::invalid_argument("EMA shadow layout mismatch");
  const double beta = ema_beta(step, beta_max, power);
  auto& s = shadow.values();
  const auto& p = student.values();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = beta * s[i] + (1.0 - beta) * p[i];
  step_count = step + 1;
}

}  // namespace ofp
