#pragma once

// The veq command line, as a library so tests can drive it in-process.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace veq::cli {

enum Exit : int {
  kOk = 0,
  kError = 1,
  kParse = 2,
  kMissingTwist = 3,
  kDepthCap = 4,
  kVerifyFail = 5,
  kQuadrature = 6,
};

inline constexpr std::uint64_t kDefaultSeed = 42;

/// Runs `veq <args...>` (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace veq::cli
