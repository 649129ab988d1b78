#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cpredict::cli {

/// Parsed command line. Unset sampler overrides keep SamplerConfig defaults.
struct CliConfig {
  std::string subcommand;
  std::string manifest;
  std::vector<std::string> conditions;
  std::vector<std::string> categories;
  int burn_in = 5000;
  int samples = 15000;
  int thin = 1;
  int chains = 1;
  int inits = 10;
  std::optional<std::uint64_t> seed;
  double train_fraction = 0.9;
  int repeats = 5;
  bool partitioned = false;
  std::vector<std::string> methods{"latentsna", "cpm", "ridge"};
  std::string select_by = "train-fit";
  unsigned threads = 0;  // 0: available parallelism
  std::string out_dir;
};

/// Entry point shared by the executable and the tests. Returns the process
/// exit code: 0 on success (warnings included), nonzero on any error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cpredict::cli
