#include "ofp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ofp {

namespace fs = std::filesystem;

const char* checkpoint_error_name(CheckpointErrorCode code) {
  switch (code) {
    case CheckpointErrorCode::kIo: return "io_error";
    case CheckpointErrorCode::kCorrupt: return "corrupt_checkpoint";
    case CheckpointErrorCode::kVersionMismatch: return "version_mismatch";
    case CheckpointErrorCode::kShapeMismatch: return "shape_mismatch";
    case CheckpointErrorCode::kConfigHashMismatch: return "config_hash_mismatch";
  }
  return "?";
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written in host order and must be little-endian");

constexpr const char* kFormat = "ofp-checkpoint";

std::string encode(const std::vector<double>& a, const std::vector<double>& b) {
  std::string out((a.size() + b.size()) * sizeof(double), '\0');
  std::memcpy(out.data(), a.data(), a.size() * sizeof(double));
  std::memcpy(out.data() + a.size() * sizeof(double), b.data(), b.size() * sizeof(double));
  return out;
}

Json layout_json(const ParamStore& p) {
  Json blocks = Json::array();
  for (const auto& b : p.blocks()) blocks.push_back({{"name", b.name}, {"shape", {b.rows, b.cols}}});
  return blocks;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const fs::path& dir, const IntervalVelocityNet& net, const EmaTeacher& teacher,
                     const Json& extra) {
  if (!teacher.shadow.same_layout(net.params())) {
    throw CheckpointError(CheckpointErrorCode::kShapeMismatch, "teacher layout differs from student");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError(CheckpointErrorCode::kIo, "cannot create " + dir.string());

  const std::string blob = encode(net.params().values(), teacher.shadow.values());
  const Json config = to_json(net.config());
  Json manifest = {
      {"format", kFormat},
      {"version", kCheckpointVersion},
      {"config", config},
      {"config_hash", json_hash(config)},
      {"blocks", layout_json(net.params())},
      {"param_count", net.params().size()},
      {"teacher", {{"step_count", teacher.step_count},
                   {"beta_max", teacher.beta_max},
                   {"power", teacher.power}}},
      {"blob_bytes", blob.size()},
      {"blob_checksum", hex64(fnv1a64(blob.data(), blob.size()))},
      {"extra", extra},
  };

  std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
  bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  std::ofstream man(dir / "manifest.json", std::ios::trunc);
  man << manifest.dump(2) << "\n";
  if (!bin || !man) throw CheckpointError(CheckpointErrorCode::kIo, "write failed in " + dir.string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  Json manifest;
  try {
    manifest = Json::parse(read_file(dir / "manifest.json"));
  } catch (const Json::exception& e) {
    throw CheckpointError(CheckpointErrorCode::kCorrupt, std::string("manifest: ") + e.what());
  }

  try {
    if (manifest.at("format").get<std::string>() != kFormat) {
      throw CheckpointError(CheckpointErrorCode::kCorrupt, "not a checkpoint manifest");
    }
    const int version = manifest.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(CheckpointErrorCode::kVersionMismatch,
                            "version " + std::to_string(version) + ", expected " +
                                std::to_string(kCheckpointVersion));
    }
    const Json& config_json = manifest.at("config");
    if (json_hash(config_json) != manifest.at("config_hash").get<std::string>()) {
      throw CheckpointError(CheckpointErrorCode::kConfigHashMismatch,
                            "config does not match its recorded hash");
    }
    NetConfig config;
    try {
      config = net_config_from_json(config_json, "config");
    } catch (const ConfigError& e) {
      throw CheckpointError(CheckpointErrorCode::kCorrupt, e.what());
    }

    IntervalVelocityNet net(config);
    if (manifest.at("blocks") != layout_json(net.params())) {
      throw CheckpointError(CheckpointErrorCode::kShapeMismatch,
                            "manifest blocks do not match the network built from its config");
    }

    const std::string blob = read_file(dir / "params.bin");
    const std::size_t n = net.params().size();
    if (blob.size() != manifest.at("blob_bytes").get<std::size_t>() ||
        blob.size() != 2 * n * sizeof(double)) {
      throw CheckpointError(CheckpointErrorCode::kCorrupt,
                            "params.bin has " + std::to_string(blob.size()) + " bytes, expected " +
                                std::to_string(2 * n * sizeof(double)));
    }
    if (hex64(fnv1a64(blob.data(), blob.size())) != manifest.at("blob_checksum").get<std::string>()) {
      throw CheckpointError(CheckpointErrorCode::kCorrupt, "params.bin checksum mismatch");
    }

    EmaTeacher teacher = EmaTeacher::from(net.params());
    std::memcpy(net.params().values().data(), blob.data(), n * sizeof(double));
    std::memcpy(teacher.shadow.values().data(), blob.data() + n * sizeof(double), n * sizeof(double));
    const Json& t = manifest.at("teacher");
    teacher.step_count = t.at("step_count").get<long>();
    teacher.beta_max = t.at("beta_max").get<double>();
    teacher.power = t.at("power").get<double>();
    return Checkpoint{std::move(net), std::move(teacher), manifest.value("extra", Json::object())};
  } catch (const Json::exception& e) {
    throw CheckpointError(CheckpointErrorCode::kCorrupt, std::string("manifest: ") + e.what());
  }
}

}  // namespace ofp
