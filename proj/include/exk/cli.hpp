#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "exk/geometry.hpp"
#include "exk/quad.hpp"

namespace exk {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitCapability = 3,
  kExitNumeric = 4,
  kExitValidation = 5,
};

struct RunConfig {
  nlohmann::json field;
  std::optional<RectDomain> domain;
  std::vector<double> levels;
  std::string method = "mean_ec";
  QuadSpec quad;
  int grid = 128;
  long long reps = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output;
};

/// Reads the JSON run configuration. Missing entries keep their defaults.
RunConfig config_from_json(const nlohmann::json& doc);

/// "A:B:S" -> A, A+S, ..., up to and including B.
std::vector<double> parse_levels(const std::string& spec);

/// Entry point of the excursion-kit executable; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Shortest round-trip-safe representation with 17 significant digits.
std::string format_number(double v);

/// RFC 4180 field quoting.
std::string csv_quote(const std::string& field);

}  // namespace exk
