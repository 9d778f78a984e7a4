#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "calibkit/calibration_metrics.hpp"
#include "calibkit/program_tokenize.hpp"

namespace calibkit {

// Everything a subcommand was run with; embedded in every report it writes.
struct RunConfig {
  std::string subcommand;
  std::vector<std::string> log_paths;
  std::optional<ProgramDialect> dialect;  // unset: take it from the log header
  NormalizationConfig normalization;
  Aggregation aggregation = Aggregation::kMin;
  BinningConfig binning;
  std::string output_dir = ".";
};

// Exit codes: 0 success, 1 validation or I/O error, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace calibkit
