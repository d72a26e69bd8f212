#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "ofp/json_util.hpp"
#include "ofp/net.hpp"

namespace ofp {

enum class CheckpointErrorCode {
  kIo,
  kCorrupt,
  kVersionMismatch,
  kShapeMismatch,
  kConfigHashMismatch,
};

const char* checkpoint_error_name(CheckpointErrorCode code);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& what)
      : std::runtime_error(std::string(checkpoint_error_name(code)) + ": " + what), code_(code) {}
  CheckpointErrorCode code() const { return code_; }

 private:
  CheckpointErrorCode code_;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  IntervalVelocityNet net;
  EmaTeacher teacher;
  Json extra;  // free-form metadata, e.g. action normalization
};

// Writes <dir>/manifest.json and <dir>/params.bin. The blob holds the student
// parameters followed by the teacher shadow, little-endian doubles in layout
// order.
void save_checkpoint(const std::filesystem::path& dir, const IntervalVelocityNet& net,
                     const EmaTeacher& teacher, const Json& extra = Json::object());

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace ofp
