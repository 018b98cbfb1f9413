#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace qmix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitNumerical = 4;

struct Options {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides the config's seed
  int jobs = 0;
};

// Bad config or input; carries the offending field path.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs one subcommand; returns the exit code for a normal finish and throws
// UsageError or qmix::Error otherwise.
int run(const Options& opt);

}  // namespace qmix::cli
