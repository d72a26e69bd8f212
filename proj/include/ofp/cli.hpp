#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ofp::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kVerificationFailed = 5,
  kNumericAbort = 6,
};

// Dispatches gen-data, train, infer, eval, verify and report. Never throws.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, char** argv);

}  // namespace ofp::cli
