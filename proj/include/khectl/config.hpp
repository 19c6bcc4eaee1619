#pragma once

// INI configuration for the command-line tool. Sections and keys are
// listed in docs/config.md; configs/paper.ini reproduces the published
// setup.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "khectl/control.hpp"
#include "khectl/errors.hpp"
#include "khectl/sim.hpp"

namespace khectl::config {

/// Raised for unknown sections/keys, unparsable values and inconsistent
/// plant descriptions.
class ConfigError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct PlantSpec {
  // continuous model k / (s (s + a)), discretized at Ts
  std::optional<double> k;
  std::optional<double> a;
  double sample_period = 0.01;
  // or explicit discrete matrices
  std::optional<Matrix> A, B, C;
};

struct AppConfig {
  PlantSpec plant_spec;
  control::GainSet gains = control::reference_gains();
  control::ControllerKind controller = control::ControllerKind::DobPid;
  unsigned bits = 120;
  sim::SimConfig sim;

  /// Resolves plant_spec. Without any plant keys this is reference_plant().
  control::PlantModel plant() const;
};

AppConfig defaults();

/// `source` only labels diagnostics.
AppConfig parse(std::string_view text, const std::string& source = "<config>");
AppConfig load(const std::filesystem::path& path);

/// "section.key=value", validated exactly like a file entry.
void apply_override(AppConfig& cfg, std::string_view assignment);
/// Applies all assignments, then validates once (A, B and C can be set together).
void apply_overrides(AppConfig& cfg, std::span<const std::string> assignments);

/// Path named by KHECTL_CONFIG, if set and non-empty.
std::optional<std::filesystem::path> env_config_path();

/// Canonical INI text for `cfg` (every key, resolved values).
std::string dump(const AppConfig& cfg);

/// Parsers shared with the command line.
sim::AttackSpec parse_attack_target(std::string_view text);  // "param:i,j,theta" | "signal:j,theta"
std::pair<double, double> parse_window(std::string_view text);  // "a:b" seconds
sim::ReferenceSchedule parse_schedule(std::string_view text);   // "t:v, t:v, ..."

}  // namespace khectl::config
