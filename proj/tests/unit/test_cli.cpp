#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "ofp/cli.hpp"
#include "ofp/config.hpp"

using namespace ofp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ofp");
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ofp_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Small enough to train in well under a second.
fs::path tiny_config(const fs::path& dir, const std::string& kind = "gmm") {
  Json j = default_run_config_json(kind);
  j["task"]["size"] = kind == "gmm" ? 96 : 3;
  j["net"]["hidden_width"] = 16;
  j["net"]["depth"] = 2;
  j["net"]["time_embed_dim"] = 8;
  j["train"]["epochs"] = 2;
  j["train"]["batch_size"] = 32;
  j["train"]["warmup_steps"] = 2;
  j["eval"]["conditions"] = 2;
  j["eval"]["samples_per_condition"] = 40;
  j["eval"]["episodes"] = 3;
  const fs::path p = dir / "config.in.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::set<std::string> flags_in(const std::string& text) {
  std::set<std::string> out;
  const std::regex re("--[a-z][a-z-]*");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    out.insert(it->str());
  }
  return out;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"fly"}).code == cli::kUsage);
  CHECK(run({"verify", "--bogus"}).code == cli::kUsage);
  CHECK(run({"infer", "--obs", "1,2"}).code == cli::kUsage);
  const Result help = run({"--help"});
  CHECK(help.code == cli::kOk);
  CHECK(help.out.find("gen-data") != std::string::npos);
}

TEST_CASE("config and io errors") {
  const fs::path dir = scratch("errors");
  CHECK(run({"gen-data", "--config", (dir / "missing.json").string(), "--out", (dir / "d").string()}).code ==
        cli::kIo);
  std::ofstream(dir / "bad.json") << R"({"train": {"epochz": 3}})";
  const Result bad = run({"gen-data", "--config", (dir / "bad.json").string(), "--out", (dir / "d").string()});
  CHECK(bad.code == cli::kConfig);
  CHECK(bad.err.find("train.epochz") != std::string::npos);
  CHECK(run({"gen-data", "--set", "net.nope=1", "--out", (dir / "d").string()}).code == cli::kConfig);
  CHECK(run({"gen-data", "--set", "train.loss.p_sc=2", "--out", (dir / "d").string()}).code == cli::kConfig);
  CHECK(run({"infer", "--checkpoint", (dir / "none").string(), "--obs", "1"}).code == cli::kIo);
  CHECK(run({"report", "--in", (dir / "none.json").string()}).code == cli::kIo);
}

TEST_CASE("config loading") {
  const fs::path dir = scratch("config");
  const fs::path file = tiny_config(dir);
  const Json on_disk = Json::parse(slurp(file));
  CHECK(merged_config_json(file, {}) == on_disk);

  const Json changed = merged_config_json(file, {"train.loss.lambda_g=0.1"});
  const Json diff = Json::diff(on_disk, changed);
  REQUIRE(diff.size() == 1);
  CHECK(diff[0]["path"] == "/train/loss/lambda_g");
  CHECK(changed["train"]["loss"]["lambda_g"] == 0.1);

  const RunConfig d = load_config({}, {});
  CHECK(d.train.loss.p_sc == 0.2);
  CHECK(d.train.loss.p_sg == 0.1);
  CHECK(d.train.loss.lambda_g == 0.05);
  CHECK(d.eval.t_w == 0.15);
  CHECK(d.train.schedule.t_alpha == 1.0);
  CHECK(d.train.schedule.t_beta == 1.5);
  CHECK(d.train.schedule.dt_mu == -0.2);
  CHECK(d.train.schedule.dt_sigma == 1.0);

  const RunConfig seeded = load_config(file, {"seed=42"});
  CHECK(seeded.train.seed == 42);
  CHECK(seeded.eval.seed == 42);
  CHECK(seeded.net.seed == 42);
}

TEST_CASE("train, infer, eval, report") {
  const fs::path dir = scratch("pipeline");
  const fs::path cfg = tiny_config(dir);

  REQUIRE(run({"gen-data", "--config", cfg.string(), "--seed", "7", "--out", (dir / "data").string()}).code ==
          cli::kOk);
  CHECK(fs::exists(dir / "data" / "config.json"));
  CHECK(Json::parse(slurp(dir / "data" / "config.json"))["seed"] == 7);

  for (const char* name : {"a", "b"}) {
    const Result r = run({"train", "--config", cfg.string(), "--seed", "7", "--out", (dir / name).string()});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  }
  const Result from_data = run({"train", "--config", cfg.string(), "--seed", "7", "--data",
                                (dir / "data").string(), "--out", (dir / "c").string()});
  REQUIRE(from_data.code == cli::kOk);
  for (const char* f : {"checkpoint/params.bin", "checkpoint/manifest.json", "train_log.csv", "config.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
  }
  CHECK(Json::parse(slurp(dir / "a" / "config.json"))["seed"] == 7);

  SUBCASE("seed precedence") {
    setenv("OFP_SEED", "9", 1);
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "env").string()}).code == cli::kOk);
    REQUIRE(run({"train", "--config", cfg.string(), "--seed", "7", "--out", (dir / "flag").string()}).code ==
            cli::kOk);
    unsetenv("OFP_SEED");
    CHECK(Json::parse(slurp(dir / "env" / "config.json"))["seed"] == 9);
    CHECK(slurp(dir / "flag" / "checkpoint/params.bin") == slurp(dir / "a" / "checkpoint/params.bin"));
    CHECK(slurp(dir / "env" / "checkpoint/params.bin") != slurp(dir / "a" / "checkpoint/params.bin"));
  }

  SUBCASE("infer") {
    const std::string ckpt = (dir / "a" / "checkpoint").string();
    const Result r = run({"infer", "--checkpoint", ckpt, "--obs", "0.1,-0.2", "--nfe", "4"});
    REQUIRE(r.code == cli::kOk);
    const Json j = Json::parse(r.out);
    CHECK(j["chunk"].size() == 8);
    CHECK(j["nfe"] == 4);
    CHECK(run({"infer", "--checkpoint", ckpt, "--obs", "0.1,-0.2", "--nfe", "4"}).out == r.out);
    const Result warm = run({"infer", "--checkpoint", ckpt, "--obs", "0.1,-0.2", "--prev",
                             "1,2,3,4,5,6,7,8", "--exec-horizon", "2"});
    REQUIRE(warm.code == cli::kOk);
    CHECK(Json::parse(warm.out)["nfe"] == 1);
    CHECK(run({"infer", "--checkpoint", ckpt, "--obs", "0.1"}).code == cli::kUsage);
    CHECK(run({"infer", "--checkpoint", ckpt, "--obs", "0.1,x"}).code == cli::kUsage);
  }

  SUBCASE("eval grid and report") {
    const std::string ckpt = (dir / "a" / "checkpoint").string();
    const Result r = run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--nfe", "1,4,100",
                          "--warm", "on,off", "--out", (dir / "eval1").string()});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    const Json report = Json::parse(slurp(dir / "eval1" / "report.json"));
    CHECK(report["cells"].size() == 6);
    CHECK(fs::exists(dir / "eval1" / "report.csv"));
    CHECK(fs::exists(dir / "eval1" / "scatter.svg"));
    CHECK(fs::exists(dir / "eval1" / "config.json"));
    CHECK(fs::exists(dir / "eval1" / "timing.json"));

    REQUIRE(run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--nfe", "1,4,100", "--warm",
                 "on,off", "--out", (dir / "eval2").string()})
                .code == cli::kOk);
    CHECK(slurp(dir / "eval1" / "report.json") == slurp(dir / "eval2" / "report.json"));
    CHECK(slurp(dir / "eval1" / "report.csv") == slurp(dir / "eval2" / "report.csv"));

    const Result rep = run({"report", "--in", (dir / "eval1" / "report.json").string(), "--out",
                            (dir / "re").string()});
    CHECK(rep.code == cli::kOk);
    CHECK(slurp(dir / "re" / "report.csv") == slurp(dir / "eval1" / "report.csv"));
    CHECK(run({"eval", "--config", cfg.string(), "--checkpoint", ckpt, "--warm", "maybe", "--out",
               (dir / "eval3").string()})
              .code == cli::kUsage);
  }
}

TEST_CASE("point-mass pipeline") {
  const fs::path dir = scratch("pm");
  const fs::path cfg = tiny_config(dir, "point_mass");
  REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "t").string()}).code == cli::kOk);
  const Result r = run({"eval", "--config", cfg.string(), "--checkpoint", (dir / "t" / "checkpoint").string(),
                        "--nfe", "1,2", "--warm", "off,on", "--out", (dir / "e").string()});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  const Json report = Json::parse(slurp(dir / "e" / "report.json"));
  CHECK(report["cells"].size() == 4);
  CHECK(report["metrics"]["expert_success_rate"] == 1.0);
}

TEST_CASE("numeric abort keeps the last good parameters") {
  const fs::path dir = scratch("abort");
  const fs::path cfg = tiny_config(dir);
  const Result r = run({"train", "--config", cfg.string(), "--set", "train.adam.lr=1e300", "--set",
                        "train.warmup_steps=0", "--out", (dir / "t").string()});
  CHECK(r.code == cli::kNumericAbort);
  CHECK(fs::exists(dir / "t" / "checkpoint_last_good" / "params.bin"));
}

TEST_CASE("verify subcommand") {
  const fs::path dir = scratch("verify");
  const Result r = run({"verify", "--out", dir.string(), "--seed", "1"});
  CHECK_MESSAGE(r.code == cli::kOk, r.out);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(fs::exists(dir / "report.json"));
}

TEST_CASE("help lists the same flags as the README") {
  const char* exe = std::getenv("OFP_CLI");
  REQUIRE(exe != nullptr);
  std::set<std::string> help;
  for (const char* sub : {"gen-data", "train", "infer", "eval", "verify", "report"}) {
    const fs::path tmp = fs::temp_directory_path() / "ofp_cli_help.txt";
    const std::string cmd = std::string(exe) + " " + sub + " --help > " + tmp.string() + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    for (const auto& f : flags_in(slurp(tmp))) help.insert(f);
  }
  const std::set<std::string> readme = flags_in(slurp(fs::path(OFP_SOURCE_DIR) / "README.md"));
  for (const auto& f : help) CHECK_MESSAGE(readme.count(f) == 1, f << " missing from README");
  for (const auto& f : readme) CHECK_MESSAGE(help.count(f) == 1, f << " not accepted by the CLI");
}
