#include "ofp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace ofp {

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const AdamConfig& c, double lr) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam_step: size mismatch");
  for (double g : grads) {
    if (!std::isfinite(g)) throw std::domain_error("adam_step: non-finite gradient");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state size mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] *= 1.0 - lr * c.weight_decay;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

double cosine_lr(long step, double peak, long warmup_steps, long total_steps) {
  if (step < warmup_steps) return peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return peak;
  const double progress = std::min(
      1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps));
  return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * progress));
}

void TrainConfig::validate() const {
  if (method != "ofp" && method != "cfm") throw ConfigError("train.method", "must be ofp or cfm");
  if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (max_steps < 0) throw ConfigError("train.max_steps", "must be >= 0");
  if (warmup_steps < 0) throw ConfigError("train.warmup_steps", "must be >= 0");
  if (!(adam.lr > 0)) throw ConfigError("train.adam.lr", "must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("train.adam.beta1", "must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("train.adam.beta2", "must lie in [0, 1)");
  if (!(adam.eps > 0)) throw ConfigError("train.adam.eps", "must be > 0");
  if (!(adam.weight_decay >= 0)) throw ConfigError("train.adam.weight_decay", "must be >= 0");
  if (!(ema_beta_max >= 0 && ema_beta_max < 1)) throw ConfigError("train.ema_beta_max", "must lie in [0, 1)");
  if (!(ema_power > 0)) throw ConfigError("train.ema_power", "must be > 0");
  loss.validate();
}

LossWeights TrainConfig::effective_weights() const {
  LossWeights w = loss;
  if (method == "cfm") {
    w.p_sc = 0.0;
    w.p_sg = 0.0;
    w.lambda_c = 0.0;
    w.lambda_g = 0.0;
  }
  return w;
}

Json to_json(const TrainConfig& c) {
  return Json{{"method", c.method},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"max_steps", c.max_steps},
              {"warmup_steps", c.warmup_steps},
              {"seed", c.seed},
              {"adam",
               {{"lr", c.adam.lr},
                {"beta1", c.adam.beta1},
                {"beta2", c.adam.beta2},
                {"eps", c.adam.eps},
                {"weight_decay", c.adam.weight_decay}}},
              {"loss", to_json(c.loss)},
              {"schedule", to_json(c.schedule)},
              {"ema_beta_max", c.ema_beta_max},
              {"ema_power", c.ema_power},
              {"log_wall_time", c.log_wall_time}};
}

TrainConfig train_config_from_json(const Json& j, const std::string& path) {
  TrainConfig c;
  JsonReader r(j, path);
  r.get("method", c.method);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("max_steps", c.max_steps);
  r.get("warmup_steps", c.warmup_steps);
  r.get("seed", c.seed);
  if (r.has("adam")) {
    JsonReader a(r.at("adam"), r.child("adam"));
    a.get("lr", c.adam.lr);
    a.get("beta1", c.adam.beta1);
    a.get("beta2", c.adam.beta2);
    a.get("eps", c.adam.eps);
    a.get("weight_decay", c.adam.weight_decay);
    a.finish();
  }
  if (r.has("loss")) c.loss = loss_weights_from_json(r.at("loss"), r.child("loss"));
  if (r.has("schedule")) c.schedule = schedule_config_from_json(r.at("schedule"), r.child("schedule"));
  r.get("ema_beta_max", c.ema_beta_max);
  r.get("ema_power", c.ema_power);
  r.get("log_wall_time", c.log_wall_time);
  r.finish();
  c.validate();
  return c;
}

std::string TrainLog::csv() const {
  std::string out = "step,lr,loss_total,loss_flow,loss_sc,loss_sg,grad_norm,ms\n";
  char buf[512];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6g\n", r.step, r.lr,
                  r.loss.total, r.loss.flow, r.loss.sc, r.loss.sg, r.grad_norm, r.ms);
    out += buf;
  }
  return out;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << csv();
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

namespace {

void put_row(ad::Tensor& t, std::size_t row, const std::vector<double>& v) {
  std::copy(v.begin(), v.end(), t.row_span(row).begin());
}

std::vector<double> normal_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  rng.fill_normal(v);
  return v;
}

}  // namespace

TrainBatch build_train_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                             const LossWeights& w, const ScheduleConfig& schedule, long step,
                             Rng& rng, BatchStats* stats) {
  const std::size_t n = indices.size();
  const auto d = static_cast<std::size_t>(ds.chunk_dim());
  const auto o = static_cast<std::size_t>(ds.obs_dim);
  const auto n_sc = static_cast<std::size_t>(std::lround(w.p_sc * static_cast<double>(n)));
  const std::size_t n_flow = n - n_sc;

  std::vector<std::uint8_t> dropped(n);
  for (auto& v : dropped) v = rng.bernoulli(w.p_drop) ? 1 : 0;

  TrainBatch b;
  FlowBatch& fb = b.flow;
  fb.a = ad::Tensor({n_flow, d});
  fb.eps = ad::Tensor({n_flow, d});
  fb.cond.obs = ad::Tensor({n_flow, o});
  fb.cond.null.resize(n_flow);
  fb.t.resize(n_flow);
  for (std::size_t i = 0; i < n_flow; ++i) {
    const std::size_t row = indices[i];
    put_row(fb.a, i, ds.normalizer.apply(ds.chunks[row]));
    put_row(fb.eps, i, normal_vector(rng, d));
    put_row(fb.cond.obs, i, ds.obs[row]);
    fb.cond.null[i] = dropped[i];
    fb.t[i] = rng.uniform();
  }

  ConsistencyBatch& cb = b.consistency;
  cb.a = ad::Tensor({n_sc, d});
  cb.eps = ad::Tensor({n_sc, d});
  cb.cond.obs = ad::Tensor({n_sc, o});
  cb.cond.null.resize(n_sc);
  cb.times.resize(n_sc);
  for (std::size_t i = 0; i < n_sc; ++i) {
    const std::size_t row = indices[n_flow + i];
    put_row(cb.a, i, ds.normalizer.apply(ds.chunks[row]));
    put_row(cb.eps, i, normal_vector(rng, d));
    put_row(cb.cond.obs, i, ds.obs[row]);
    cb.cond.null[i] = dropped[n_flow + i];
    // A zero-length interval has no consistency target; redraw.
    do {
      cb.times[i] = sample_training_times(rng, schedule, step);
    } while (!(cb.times[i].r > cb.times[i].t));
  }

  std::vector<std::size_t> real_flow;
  for (std::size_t i = 0; i < n_flow; ++i) {
    if (!dropped[i]) real_flow.push_back(i);
  }
  const std::size_t n_g = std::min(
      real_flow.size(), static_cast<std::size_t>(std::lround(w.p_sg * static_cast<double>(n_flow))));
  GuidanceBatch& gb = b.guidance;
  gb.a = ad::Tensor({n_g, d});
  gb.eps0 = ad::Tensor({n_g, d});
  gb.eps1 = ad::Tensor({n_g, d});
  gb.obs = ad::Tensor({n_g, o});
  gb.t.resize(n_g);
  gb.t_prime.resize(n_g);
  for (std::size_t k = 0; k < n_g; ++k) {
    const std::size_t i = real_flow[k];
    const std::size_t row = indices[i];
    put_row(gb.a, k, ds.normalizer.apply(ds.chunks[row]));
    put_row(gb.eps0, k, normal_vector(rng, d));
    put_row(gb.eps1, k, normal_vector(rng, d));
    put_row(gb.obs, k, ds.obs[row]);
    gb.t[k] = rng.uniform();
    gb.t_prime[k] = rng.uniform();
  }

  if (stats) {
    stats->items += static_cast<long>(n);
    for (auto v : dropped) stats->null_items += v;
    stats->flow_items += static_cast<long>(n_flow);
    stats->consistency_items += static_cast<long>(n_sc);
    stats->guidance_items += static_cast<long>(n_g);
  }
  return b;
}

long total_train_steps(const TrainConfig& c, std::size_t dataset_size) {
  const long per_epoch = static_cast<long>((dataset_size + c.batch_size - 1) / c.batch_size);
  const long steps = per_epoch * c.epochs;
  return c.max_steps > 0 ? std::min(steps, c.max_steps) : steps;
}

TrainResult train(const Dataset& ds, const NetConfig& net_config, const TrainConfig& config,
                  const StepHook& hook) {
  config.validate();
  ds.validate();
  if (net_config.obs_dim != ds.obs_dim || net_config.chunk_dim() != ds.chunk_dim()) {
    throw ConfigError("net", "network dims do not match the dataset (obs " +
                                 std::to_string(ds.obs_dim) + ", chunk " +
                                 std::to_string(ds.chunk_dim()) + ")");
  }

  IntervalVelocityNet net(net_config);
  EmaTeacher teacher = EmaTeacher::from(net.params(), config.ema_beta_max, config.ema_power);
  const LossWeights weights = config.effective_weights();
  ScheduleConfig schedule = config.schedule;
  schedule.total_steps = total_train_steps(config, ds.size());
  schedule.validate();

  Rng rng(config.seed, 0x7a1e);
  AdamState adam;
  TrainLog log;
  BatchStats stats;
  std::vector<std::size_t> order(ds.size());
  std::size_t cursor = order.size();

  for (long step = 0; step < schedule.total_steps; ++step) {
    const auto start = std::chrono::steady_clock::now();
    if (cursor >= order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      cursor = 0;
    }
    const std::size_t end = std::min(order.size(), cursor + static_cast<std::size_t>(config.batch_size));
    std::vector<std::size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
    cursor = end;

    TrainBatch batch = build_train_batch(ds, indices, weights, schedule, step, rng, &stats);

    ad::Tape tape;
    const auto student_vars = net.params().bind(tape, true);
    const auto teacher_vars = teacher.shadow.bind(tape, false);
    const NetExpr student(net, student_vars);
    const NetExpr target_net(net, teacher_vars);
    const UnifiedLoss loss = unified_loss(tape, student, target_net, batch, weights);
    if (!std::isfinite(loss.terms.total)) {
      throw TrainingAborted("non-finite loss at step " + std::to_string(step), step, net, teacher);
    }
    const std::vector<double> grad = net.params().flat_gradient(tape.backward(loss.total), student_vars);
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    const double grad_norm = std::sqrt(sq);
    if (!std::isfinite(grad_norm)) {
      throw TrainingAborted("non-finite gradient at step " + std::to_string(step), step, net, teacher);
    }

    const double lr = cosine_lr(step, config.adam.lr, config.warmup_steps, schedule.total_steps);
    adam_step(net.params().values(), grad, adam, config.adam, lr);
    teacher.update(net.params(), step);

    TrainRecord rec{step, lr, loss.terms, grad_norm, 0.0};
    if (config.log_wall_time) {
      rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    log.records.push_back(rec);
    if (hook) hook(rec);
  }
  net.reset_forward_count();
  return TrainResult{std::move(net), std::move(teacher), std::move(log), stats};
}

}  // namespace ofp
