#include "ofp/config.hpp"

#include <fstream>

namespace ofp {

void RunConfig::resolve() {
  net.seed = seed;
  train.seed = seed;
  eval.seed = seed;
  if (task_kind == "gmm") {
    net.obs_dim = gmm.obs_dim;
    net.action_dim = gmm.action_dim;
    net.horizon = gmm.horizon;
  } else {
    net.obs_dim = PointMassConfig::kObsDim;
    net.action_dim = PointMassConfig::kActionDim;
    net.horizon = point_mass.horizon;
  }
}

namespace {

Json without_seed(Json j) {
  j.erase("seed");
  return j;
}

Json net_shape_json(const NetConfig& n) {
  return Json{{"hidden_width", n.hidden_width}, {"depth", n.depth}, {"time_embed_dim", n.time_embed_dim}};
}

}  // namespace

Json to_json(const RunConfig& c) {
  return Json{
      {"seed", c.seed},
      {"task",
       {{"kind", c.task_kind},
        {"size", c.task_size},
        {"params", c.task_kind == "gmm" ? to_json(c.gmm) : to_json(c.point_mass)}}},
      {"net", net_shape_json(c.net)},
      {"train", without_seed(to_json(c.train))},
      {"eval", without_seed(to_json(c.eval))},
  };
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  JsonReader r(j, "");
  r.get("seed", c.seed);
  if (r.has("task")) {
    JsonReader t(r.at("task"), "task");
    t.get("kind", c.task_kind);
    if (c.task_kind != "gmm" && c.task_kind != "point_mass") {
      throw ConfigError("task.kind", "must be gmm or point_mass");
    }
    t.get("size", c.task_size);
    if (c.task_size < 1) throw ConfigError("task.size", "must be >= 1");
    if (t.has("params")) {
      if (c.task_kind == "gmm") {
        c.gmm = gmm_task_from_json(t.at("params"), "task.params");
      } else {
        c.point_mass = point_mass_from_json(t.at("params"), "task.params");
      }
    }
    t.finish();
  }
  if (r.has("net")) {
    JsonReader n(r.at("net"), "net");
    n.get("hidden_width", c.net.hidden_width);
    n.get("depth", c.net.depth);
    n.get("time_embed_dim", c.net.time_embed_dim);
    n.finish();
  }
  auto reject_seed = [](const Json& section, const std::string& name) {
    if (section.is_object() && section.contains("seed")) {
      throw ConfigError(name + ".seed", "set the top-level seed instead");
    }
  };
  if (r.has("train")) {
    reject_seed(r.at("train"), "train");
    c.train = train_config_from_json(r.at("train"), "train");
  }
  if (r.has("eval")) {
    reject_seed(r.at("eval"), "eval");
    c.eval = eval_config_from_json(r.at("eval"), "eval");
  }
  r.finish();
  c.resolve();
  c.net.validate();
  return c;
}

Json default_run_config_json(const std::string& task_kind) {
  RunConfig c;
  c.task_kind = task_kind;
  if (task_kind == "point_mass") {
    c.task_size = 100;
    c.eval.warm_options = {false, true};
  }
  c.resolve();
  return to_json(c);
}

void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(assignment, "override must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError(path, "unknown key");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::exception&) {
    value = text;
  }
  *node = value;
}

Json merged_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  Json file = Json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    try {
      file = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
    }
    if (!file.is_object()) throw ConfigError(path.string(), "config must be a JSON object");
  }
  std::string kind = "gmm";
  if (file.contains("task") && file["task"].is_object() && file["task"].contains("kind") &&
      file["task"]["kind"].is_string()) {
    kind = file["task"]["kind"].get<std::string>();
  }
  for (const auto& o : overrides) {
    if (o.rfind("task.kind=", 0) == 0) kind = o.substr(10);
  }
  if (kind != "gmm" && kind != "point_mass") throw ConfigError("task.kind", "must be gmm or point_mass");
  Json merged = default_run_config_json(kind);
  // Objects merge key by key; arrays and scalars replace.
  merged.merge_patch(file);
  for (const auto& o : overrides) apply_override(merged, o);
  return merged;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  return run_config_from_json(merged_config_json(path, overrides));
}

}  // namespace ofp
