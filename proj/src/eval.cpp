#include "ofp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ofp/kernels.hpp"

namespace ofp {

double energy_distance(const ad::Tensor& p, const ad::Tensor& q) {
  if (p.rows() == 0 || q.rows() == 0) throw std::invalid_argument("energy_distance: empty sample");
  if (p.cols() != q.cols()) {
    throw std::invalid_argument("energy_distance: dimension mismatch " + std::to_string(p.cols()) +
                                " vs " + std::to_string(q.cols()));
  }
  const std::size_t d = p.cols();
  const double xy = kernels::mean_pairwise_distance(p.data, p.rows(), q.data, q.rows(), d);
  const double xx = kernels::mean_pairwise_distance(p.data, p.rows(), p.data, p.rows(), d);
  const double yy = kernels::mean_pairwise_distance(q.data, q.rows(), q.data, q.rows(), d);
  return std::max(0.0, 2.0 * xy - xx - yy);
}

SamplerKind sampler_kind_from_name(const std::string& name) {
  if (name == "interval") return SamplerKind::kInterval;
  if (name == "euler") return SamplerKind::kEuler;
  throw std::invalid_argument("unknown sampler '" + name + "' (expected interval or euler)");
}

const char* sampler_kind_name(SamplerKind k) {
  return k == SamplerKind::kInterval ? "interval" : "euler";
}

ad::Tensor generate(const IntervalField& field, SamplerKind kind, const CondBatch& cond,
                    const ad::Tensor& eps, int steps) {
  const TimeGrid grid = TimeGrid::uniform(steps);
  if (kind == SamplerKind::kEuler) return euler_sample(field, cond, eps, grid);
  if (steps == 1) return one_step_sample(field, cond, eps);
  return multi_step_sample(field, cond, eps, grid);
}

ad::Tensor generate_warm(const IntervalField& field, SamplerKind kind, const CondBatch& cond,
                         const ad::Tensor& eps, const ad::Tensor& prior, double t_w, int steps) {
  if (steps < 1) throw std::invalid_argument("generate_warm: steps must be >= 1");
  if (kind == SamplerKind::kInterval && steps == 1) {
    return warm_start_sample(field, cond, eps, prior, t_w);
  }
  if (prior.shape != eps.shape) throw std::invalid_argument("warm prior shape differs from noise");
  ad::Tensor z(eps.shape);
  for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = (1.0 - t_w) * eps.data[i] + t_w * prior.data[i];
  IntervalQuery q;
  q.cond = cond;
  for (int k = 0; k < steps; ++k) {
    const double t = t_w + (1.0 - t_w) * k / steps;
    const double r = k + 1 == steps ? 1.0 : t_w + (1.0 - t_w) * (k + 1) / steps;
    q.z = z;
    q.t.assign(z.rows(), t);
    q.r.assign(z.rows(), kind == SamplerKind::kInterval ? r : t);
    const ad::Tensor u = field.evaluate(q);
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] += (r - t) * u.data[i];
  }
  return z;
}

void EvalConfig::validate() const {
  if (nfe_list.empty()) throw ConfigError("eval.nfe_list", "must not be empty");
  for (int n : nfe_list) {
    if (n < 1) throw ConfigError("eval.nfe_list", "entries must be >= 1");
  }
  if (warm_options.empty()) throw ConfigError("eval.warm_options", "must not be empty");
  if (episodes < 1) throw ConfigError("eval.episodes", "must be >= 1");
  if (conditions < 1) throw ConfigError("eval.conditions", "must be >= 1");
  if (samples_per_condition < 2) throw ConfigError("eval.samples_per_condition", "must be >= 2");
  if (!(t_w >= 0.0 && t_w <= 1.0)) throw ConfigError("eval.t_w", "must lie in [0, 1]");
  if (sampler != "interval" && sampler != "euler") {
    throw ConfigError("eval.sampler", "must be interval or euler");
  }
  if (weights != "ema" && weights != "student") throw ConfigError("eval.weights", "must be ema or student");
}

Json to_json(const EvalConfig& c) {
  return Json{{"nfe_list", c.nfe_list},
              {"warm_options", c.warm_options},
              {"episodes", c.episodes},
              {"conditions", c.conditions},
              {"samples_per_condition", c.samples_per_condition},
              {"t_w", c.t_w},
              {"sampler", c.sampler},
              {"weights", c.weights},
              {"seed", c.seed}};
}

EvalConfig eval_config_from_json(const Json& j, const std::string& path) {
  EvalConfig c;
  JsonReader r(j, path);
  r.get("nfe_list", c.nfe_list);
  r.get("warm_options", c.warm_options);
  r.get("episodes", c.episodes);
  r.get("conditions", c.conditions);
  r.get("samples_per_condition", c.samples_per_condition);
  r.get("t_w", c.t_w);
  r.get("sampler", c.sampler);
  r.get("weights", c.weights);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

PolicyFn model_policy(const IntervalField& field, const ActionNormalizer& normalizer,
                      SamplerKind kind, int nfe, bool warm, double t_w, int exec_horizon,
                      int action_dim, int horizon) {
  const auto chunk_dim = static_cast<std::size_t>(action_dim * horizon);
  return [&field, normalizer, kind, nfe, warm, t_w, exec_horizon, action_dim, chunk_dim](
             const std::vector<double>& obs, const std::optional<Chunk>& prev, Rng& rng) {
    const CondBatch cond = CondBatch::repeat(obs, 1);
    ad::Tensor eps({1, chunk_dim});
    rng.fill_normal(eps.data);
    if (warm && prev) {
      const Chunk prior = build_warm_prior(normalizer.apply(*prev), exec_horizon, action_dim);
      return normalizer.invert(
          generate_warm(field, kind, cond, eps, ad::Tensor::row(prior), t_w, nfe).data);
    }
    return normalizer.invert(generate(field, kind, cond, eps, nfe).data);
  };
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

const ParamStore& eval_params(const Checkpoint& ckpt, const EvalConfig& c) {
  return c.weights == "ema" ? ckpt.teacher.shadow : ckpt.net.params();
}

ActionNormalizer checkpoint_normalizer(const Checkpoint& ckpt) {
  if (ckpt.extra.contains("normalization")) {
    return action_normalizer_from_json(ckpt.extra.at("normalization"), "checkpoint.normalization");
  }
  return ActionNormalizer::identity(ckpt.net.config().action_dim);
}

Report base_report(const Checkpoint& ckpt, const EvalConfig& c) {
  Report r;
  r.seed = c.seed;
  r.config_hash = json_hash(Json{{"eval", to_json(c)}, {"net", to_json(ckpt.net.config())}});
  r.checkpoint = ckpt.extra.value("checkpoint_id", std::string());
  r.run_id = ckpt.extra.value("run_id", std::string("eval")) + "-" + r.config_hash.substr(0, 8);
  return r;
}

ad::Tensor rows_to_tensor(const std::vector<Chunk>& rows) {
  ad::Tensor t({rows.size(), rows.empty() ? 0 : rows.front().size()});
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), t.row_span(i).begin());
  return t;
}

std::string cell_key(int nfe, bool warm) {
  return "nfe" + std::to_string(nfe) + (warm ? "_warm" : "_cold");
}

}  // namespace

EvalOutput policy_eval_gmm(const Checkpoint& ckpt, const GmmTaskSpec& task, const EvalConfig& c) {
  c.validate();
  task.validate();
  const IntervalVelocityNet& net = ckpt.net;
  if (net.config().chunk_dim() != task.chunk_dim() || net.config().obs_dim != task.obs_dim) {
    throw ConfigError("task", "task dims do not match the checkpoint");
  }
  const NetField field(net, eval_params(ckpt, c));
  const ActionNormalizer norm = checkpoint_normalizer(ckpt);
  const SamplerKind kind = sampler_kind_from_name(c.sampler);
  const auto n = static_cast<std::size_t>(c.samples_per_condition);
  const auto d = static_cast<std::size_t>(task.chunk_dim());

  // Shared conditions, expert samples and noise across cells.
  const Rng root(c.seed, 0xe7a1);
  std::vector<std::vector<double>> conds;
  std::vector<ad::Tensor> expert, expert_b, noise;
  for (int k = 0; k < c.conditions; ++k) {
    Rng rng = root.split(static_cast<std::uint64_t>(k));
    conds.push_back(gmm_sample_obs(task, rng));
    std::vector<Chunk> xs, ys;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(gmm_expert_sample(task, conds.back(), rng));
    for (std::size_t i = 0; i < n; ++i) ys.push_back(gmm_expert_sample(task, conds.back(), rng));
    expert.push_back(rows_to_tensor(xs));
    expert_b.push_back(rows_to_tensor(ys));
    ad::Tensor e({n, d});
    rng.fill_normal(e.data);
    noise.push_back(std::move(e));
  }

  EvalOutput out;
  out.report = base_report(ckpt, c);
  double floor = 0.0;
  for (int k = 0; k < c.conditions; ++k) floor += energy_distance(expert[static_cast<std::size_t>(k)], expert_b[static_cast<std::size_t>(k)]);
  out.report.metrics["expert_energy_distance"] = floor / c.conditions;

  for (int nfe : c.nfe_list) {
    for (bool warm : c.warm_options) {
      ReportCell cell{nfe, warm, {}};
      double ed = 0.0;
      std::uint64_t calls = 0;
      double ms = 0.0;
      for (int k = 0; k < c.conditions; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const CondBatch cond = CondBatch::repeat(conds[ku], n);
        const std::uint64_t before = net.forward_count();
        const auto start = Clock::now();
        // No previous chunk exists for independent draws, so warm cells use
        // the cold start of the first control step.
        ad::Tensor samples = generate(field, kind, cond, noise[ku], nfe);
        ms += ms_since(start);
        calls += net.forward_count() - before;
        for (std::size_t i = 0; i < n; ++i) {
          const Chunk raw = norm.invert(Chunk(samples.row_span(i).begin(), samples.row_span(i).end()));
          std::copy(raw.begin(), raw.end(), samples.row_span(i).begin());
        }
        ed += energy_distance(samples, expert[ku]);
        if (k == 0 && nfe == c.nfe_list.front() && warm == c.warm_options.front()) {
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t last = d - 2;
            out.scatter.generated.push_back({samples.at(i, last), samples.at(i, last + 1)});
            out.scatter.expert.push_back({expert[0].at(i, last), expert[0].at(i, last + 1)});
          }
        }
      }
      cell.metrics["energy_distance"] = ed / c.conditions;
      cell.metrics["nfe_measured"] = static_cast<double>(calls) / c.conditions;
      out.timing[cell_key(nfe, warm)] = {{"ms_per_batch", ms / c.conditions},
                                          {"batch_size", n}};
      out.report.cells.push_back(std::move(cell));
    }
  }
  return out;
}

EvalOutput policy_eval_point_mass(const Checkpoint& ckpt, const PointMassConfig& task,
                                  const EvalConfig& c) {
  c.validate();
  task.validate();
  const IntervalVelocityNet& net = ckpt.net;
  if (net.config().chunk_dim() != task.chunk_dim() ||
      net.config().obs_dim != PointMassConfig::kObsDim) {
    throw ConfigError("task", "task dims do not match the checkpoint");
  }
  const NetField field(net, eval_params(ckpt, c));
  const ActionNormalizer norm = checkpoint_normalizer(ckpt);
  const SamplerKind kind = sampler_kind_from_name(c.sampler);

  EvalOutput out;
  out.report = base_report(ckpt, c);
  const RolloutMetrics expert = rollout(task, expert_policy(task), c.episodes, c.seed);
  out.report.metrics["expert_success_rate"] = expert.success_rate;
  out.report.metrics["expert_chunk_jump"] = expert.chunk_jump;

  for (int nfe : c.nfe_list) {
    for (bool warm : c.warm_options) {
      const PolicyFn policy = model_policy(field, norm, kind, nfe, warm, c.t_w, task.exec_horizon,
                                           PointMassConfig::kActionDim, task.horizon);
      const std::uint64_t before = net.forward_count();
      const auto start = Clock::now();
      const RolloutMetrics m = rollout(task, policy, c.episodes, c.seed);
      const double ms = ms_since(start);
      const std::uint64_t calls = net.forward_count() - before;
      ReportCell cell{nfe, warm, {}};
      cell.metrics["success_rate"] = m.success_rate;
      cell.metrics["mean_steps"] = m.mean_steps;
      cell.metrics["smoothness"] = m.smoothness;
      cell.metrics["chunk_jump"] = m.chunk_jump;
      cell.metrics["chunks"] = static_cast<double>(m.chunks);
      cell.metrics["nfe_measured"] = m.chunks > 0 ? static_cast<double>(calls) / m.chunks : 0.0;
      out.timing[cell_key(nfe, warm)] = {{"ms_per_chunk", m.chunks > 0 ? ms / m.chunks : 0.0}};
      out.report.cells.push_back(std::move(cell));
    }
  }
  return out;
}

double chunk_latency_ms(const IntervalField& field, SamplerKind kind, const std::vector<double>& obs,
                        int chunk_dim, int nfe, int repeats, std::uint64_t seed) {
  Rng rng(seed, 0x1a7);
  const CondBatch cond = CondBatch::repeat(obs, 1);
  ad::Tensor eps({1, static_cast<std::size_t>(chunk_dim)});
  double sink = 0.0;
  const auto start = Clock::now();
  for (int i = 0; i < repeats; ++i) {
    rng.fill_normal(eps.data);
    sink += generate(field, kind, cond, eps, nfe).data[0];
  }
  const double ms = ms_since(start);
  if (!std::isfinite(sink)) throw std::domain_error("chunk_latency_ms: non-finite sample");
  return ms / repeats;
}

}  // namespace ofp
