#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ofp/checkpoint.hpp"
#include "ofp/cli.hpp"
#include "ofp/config.hpp"
#include "ofp/dataset.hpp"
#include "ofp/eval.hpp"
#include "ofp/report.hpp"
#include "ofp/sampler.hpp"
#include "ofp/trainer.hpp"
#include "ofp/verify.hpp"

namespace ofp::cli {

namespace fs = std::filesystem;

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  long long seed = -1;
  std::string out;
};

void add_common(CLI::App* app, CommonOptions& o, bool needs_out) {
  app->add_option("--config", o.config, "JSON run config (defaults apply to missing keys)");
  app->add_option("--set", o.overrides, "Override a config value, e.g. train.loss.lambda_g=0.1")
      ->allow_extra_args(false);
  app->add_option("--seed", o.seed, "Seed (takes precedence over OFP_SEED and the config)");
  auto* out = app->add_option("--out", o.out, "Output directory");
  if (needs_out) out->required();
}

RunConfig resolve_config(const CommonOptions& o, Json* effective) {
  std::vector<std::string> overrides = o.overrides;
  if (const char* env = std::getenv("OFP_SEED")) overrides.push_back(std::string("seed=") + env);
  if (o.seed >= 0) overrides.push_back("seed=" + std::to_string(o.seed));
  Json merged = merged_config_json(o.config, overrides);
  RunConfig cfg = run_config_from_json(merged);
  if (effective) *effective = to_json(cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

void write_effective_config(const fs::path& dir, const Json& effective) {
  write_text(dir / "config.json", effective.dump(2) + "\n");
}

Dataset build_dataset(const RunConfig& cfg) {
  if (cfg.task_kind == "gmm") return make_gmm_dataset(cfg.gmm, cfg.task_size, cfg.seed);
  return make_point_mass_dataset(cfg.point_mass, cfg.task_size, cfg.seed);
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "'" + cell + "' is not a number");
    }
  }
  return out;
}

std::vector<bool> parse_warm(const std::string& text) {
  std::vector<bool> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell == "on") {
      out.push_back(true);
    } else if (cell == "off") {
      out.push_back(false);
    } else {
      throw CLI::ValidationError("--warm", "expected on/off, got '" + cell + "'");
    }
  }
  return out;
}

Json checkpoint_extra(const RunConfig& cfg, const Dataset& ds, const Json& effective) {
  return Json{{"normalization", to_json(ds.normalizer)},
              {"task_kind", cfg.task_kind},
              {"run_id", cfg.task_kind + "-" + cfg.train.method + "-s" + std::to_string(cfg.seed)},
              {"checkpoint_id", json_hash(effective)},
              {"config", effective}};
}

int cmd_gen_data(const CommonOptions& o, std::ostream& out) {
  Json effective;
  const RunConfig cfg = resolve_config(o, &effective);
  const Dataset ds = build_dataset(cfg);
  save_dataset(o.out, ds);
  write_effective_config(o.out, effective);
  out << "wrote " << ds.size() << " rows (" << ds.n_demos << " demos) to " << o.out << "\n";
  return kOk;
}

int cmd_train(const CommonOptions& o, const std::string& data_dir, std::ostream& out) {
  Json effective;
  const RunConfig cfg = resolve_config(o, &effective);
  const Dataset ds = data_dir.empty() ? build_dataset(cfg) : load_dataset(data_dir);
  if (ds.task != cfg.task_kind) {
    throw ConfigError("task.kind", "dataset task is '" + ds.task + "', config says '" + cfg.task_kind + "'");
  }
  const fs::path dir = o.out;
  write_effective_config(dir, effective);
  const Json extra = checkpoint_extra(cfg, ds, effective);
  try {
    TrainResult res = train(ds, cfg.net, cfg.train);
    res.log.write_csv(dir / "train_log.csv");
    save_checkpoint(dir / "checkpoint", res.net, res.teacher, extra);
    const auto& last = res.log.records.back();
    out << "trained " << res.log.records.size() << " steps, final loss " << last.loss.total
        << ", null fraction "
        << static_cast<double>(res.stats.null_items) / static_cast<double>(res.stats.items) << "\n";
  } catch (const TrainingAborted& e) {
    save_checkpoint(dir / "checkpoint_last_good", e.net(), e.teacher(), extra);
    throw;
  }
  return kOk;
}

int cmd_infer(const std::string& ckpt_dir, const std::string& obs_text, int nfe,
              const std::string& sampler, const std::string& prev_text, double t_w, int exec_h,
              const std::string& weights, long long seed, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_dir);
  const NetConfig& nc = ckpt.net.config();
  const std::vector<double> obs = parse_list(obs_text, "--obs");
  if (obs.size() != static_cast<std::size_t>(nc.obs_dim)) {
    throw CLI::ValidationError("--obs", "expected " + std::to_string(nc.obs_dim) + " values");
  }
  if (weights != "ema" && weights != "student") throw CLI::ValidationError("--weights", "ema or student");
  const NetField field(ckpt.net, weights == "ema" ? ckpt.teacher.shadow : ckpt.net.params());
  const ActionNormalizer norm =
      ckpt.extra.contains("normalization")
          ? action_normalizer_from_json(ckpt.extra.at("normalization"), "checkpoint.normalization")
          : ActionNormalizer::identity(nc.action_dim);
  std::optional<Chunk> prev;
  if (!prev_text.empty()) {
    prev = parse_list(prev_text, "--prev");
    if (prev->size() != static_cast<std::size_t>(nc.chunk_dim())) {
      throw CLI::ValidationError("--prev", "expected " + std::to_string(nc.chunk_dim()) + " values");
    }
  }
  const PolicyFn policy = model_policy(field, norm, sampler_kind_from_name(sampler), nfe,
                                       prev.has_value(), t_w, exec_h, nc.action_dim, nc.horizon);
  Rng rng(static_cast<std::uint64_t>(seed < 0 ? 0 : seed), 0x1f);
  ckpt.net.reset_forward_count();
  const Chunk chunk = policy(obs, prev, rng);
  out << Json{{"chunk", chunk}, {"nfe", ckpt.net.forward_count()}}.dump() << "\n";
  return kOk;
}

int cmd_eval(const CommonOptions& o, const std::string& ckpt_dir, const std::string& nfe_text,
             const std::string& warm_text, int episodes, std::ostream& out) {
  CommonOptions adjusted = o;
  if (!nfe_text.empty()) {
    std::string list;
    for (double v : parse_list(nfe_text, "--nfe")) list += (list.empty() ? "" : ",") + std::to_string(static_cast<int>(v));
    adjusted.overrides.push_back("eval.nfe_list=[" + list + "]");
  }
  if (!warm_text.empty()) {
    std::string list;
    for (bool w : parse_warm(warm_text)) list += std::string(list.empty() ? "" : ",") + (w ? "true" : "false");
    adjusted.overrides.push_back("eval.warm_options=[" + list + "]");
  }
  if (episodes > 0) adjusted.overrides.push_back("eval.episodes=" + std::to_string(episodes));
  Json effective;
  const RunConfig cfg = resolve_config(adjusted, &effective);
  const Checkpoint ckpt = load_checkpoint(ckpt_dir);
  EvalOutput res = cfg.task_kind == "gmm" ? policy_eval_gmm(ckpt, cfg.gmm, cfg.eval)
                                          : policy_eval_point_mass(ckpt, cfg.point_mass, cfg.eval);
  res.report.checkpoint = ckpt_dir;
  const fs::path dir = o.out;
  write_effective_config(dir, effective);
  emit_report(dir, res.report, res.scatter.generated.empty() ? nullptr : &res.scatter);
  write_text(dir / "timing.json", res.timing.dump(2) + "\n");
  out << report_csv(res.report);
  return kOk;
}

int cmd_verify(const std::string& out_dir, long long seed_flag, std::ostream& out) {
  std::uint64_t seed = 0;
  if (const char* env = std::getenv("OFP_SEED")) seed = std::stoull(env);
  if (seed_flag >= 0) seed = static_cast<std::uint64_t>(seed_flag);
  Report r;
  r.run_id = "verify-s" + std::to_string(seed);
  r.seed = seed;
  r.config_hash = json_hash(Json{{"verify_seed", seed}});
  r.verifications = run_all_verifications(seed);
  for (const auto& v : r.verifications) {
    out << (v.passed ? "PASS " : "FAIL ") << v.name << ": measured " << v.measured
        << " threshold " << v.threshold << " (" << v.detail << ")\n";
  }
  if (!out_dir.empty()) {
    emit_report(out_dir, r);
    write_effective_config(out_dir, Json{{"seed", seed}, {"command", "verify"}});
  }
  return r.all_passed() ? kOk : kVerificationFailed;
}

int cmd_report(const std::string& in, const std::string& out_dir, std::ostream& out) {
  std::ifstream f(in);
  if (!f) throw IoError("cannot open " + in);
  Report r;
  try {
    r = report_from_json(Json::parse(f));
  } catch (const Json::exception& e) {
    throw ConfigError(in, std::string("not a report: ") + e.what());
  }
  if (!out_dir.empty()) emit_report(out_dir, r);
  out << report_csv(r);
  return kOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train and evaluate one-step flow policies on synthetic control tasks", "ofp"};
  app.require_subcommand(1);

  CommonOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a dataset from the task section");
  add_common(gen_cmd, gen, true);

  CommonOptions tr;
  std::string data_dir;
  auto* train_cmd = app.add_subcommand("train", "Train a network and write a checkpoint");
  add_common(train_cmd, tr, true);
  train_cmd->add_option("--data", data_dir, "Dataset directory (generated from the config if absent)");

  std::string ckpt_infer, obs_text, sampler = "interval", prev_text, weights = "ema";
  int nfe_infer = 1, exec_h = 4;
  double t_w = 0.15;
  long long seed_infer = 0;
  auto* infer_cmd = app.add_subcommand("infer", "Sample one action chunk for an observation");
  infer_cmd->add_option("--checkpoint", ckpt_infer, "Checkpoint directory")->required();
  infer_cmd->add_option("--obs", obs_text, "Comma-separated observation")->required();
  infer_cmd->add_option("--nfe", nfe_infer, "Network evaluations per chunk")->check(CLI::PositiveNumber);
  infer_cmd->add_option("--sampler", sampler, "interval or euler");
  infer_cmd->add_option("--prev", prev_text, "Previous raw chunk; enables the warm start");
  infer_cmd->add_option("--t-w", t_w, "Warm-start noise level")->check(CLI::Range(0.0, 1.0));
  infer_cmd->add_option("--exec-horizon", exec_h, "Executed steps of the previous chunk");
  infer_cmd->add_option("--weights", weights, "ema or student");
  infer_cmd->add_option("--seed", seed_infer, "Noise seed");

  CommonOptions ev;
  std::string ckpt_eval, nfe_text, warm_text;
  int episodes = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint over NFE and warm-start cells");
  add_common(eval_cmd, ev, true);
  eval_cmd->add_option("--checkpoint", ckpt_eval, "Checkpoint directory")->required();
  eval_cmd->add_option("--nfe", nfe_text, "Comma-separated NFE list, e.g. 1,4,100");
  eval_cmd->add_option("--warm", warm_text, "Comma-separated on/off list");
  eval_cmd->add_option("--episodes", episodes, "Rollout episodes per cell (point mass)");

  std::string verify_out;
  long long verify_seed = -1;
  auto* verify_cmd = app.add_subcommand("verify", "Run the numerical identity and oracle checks");
  verify_cmd->add_option("--out", verify_out, "Write report files here");
  verify_cmd->add_option("--seed", verify_seed, "Seed for randomized checks");

  std::string report_in, report_out;
  auto* report_cmd = app.add_subcommand("report", "Re-emit a report.json as CSV");
  report_cmd->add_option("--in", report_in, "report.json to read")->required();
  report_cmd->add_option("--out", report_out, "Directory for regenerated report files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(tr, data_dir, out);
    if (*infer_cmd) {
      return cmd_infer(ckpt_infer, obs_text, nfe_infer, sampler, prev_text, t_w, exec_h, weights,
                       seed_infer, out);
    }
    if (*eval_cmd) return cmd_eval(ev, ckpt_eval, nfe_text, warm_text, episodes, out);
    if (*verify_cmd) return cmd_verify(verify_out, verify_seed, out);
    if (*report_cmd) return cmd_report(report_in, report_out, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingAborted& e) {
    err << "numeric abort: " << e.what() << " (last good parameters saved)\n";
    return kNumericAbort;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::runtime_error& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}

int run_command(int argc, char** argv) {
  return run_command(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace ofp::cli
