#pragma once

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Unknown keys are rejected.

#include <cstdint>
#include <string>
#include <string_view>

#include "nld/runner.hpp"
#include "nld/simulate.hpp"

namespace nld {

struct SimulationConfig {
  std::size_t h = 64;
  std::size_t w = 64;
  std::size_t coils = 8;
  PatternKind pattern = PatternKind::uniform1d;
  int r = 4;
  int r2 = 1;  // column acceleration, uniform2d only
  std::size_t acs = 16;
  double noise = 0.0;
  double phase_strength = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

struct RunConfig {
  SimulationConfig sim;
  ReconConfig recon;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_run_config(std::string_view text);
std::string serialize_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

// Locale-independent shortest round-trip formatting.
std::string format_double(double v);

}  // namespace nld
