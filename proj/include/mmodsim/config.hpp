#pragma once

#include <cstdint>
#include <string>

#include "mmodsim/acquisition.hpp"
#include "mmodsim/analysis.hpp"
#include "mmodsim/geometry.hpp"
#include "mmodsim/synth.hpp"

namespace mmodsim {

/// Everything the pipeline needs, with embedded defaults. A config file
/// only has to carry the keys it overrides.
struct SimConfig {
  SensorGeometry geometry = SensorGeometry::with_defaults();
  GridLayout layout{};
  SynthConfig synth = SynthConfig::defaults();
  AcsConfig acs{};
  RgsConfig rgs{};
  ArrivalParams arrival{};
  double ambient_temp_c = 25.0;  // grid + thermistor nominal

  /// Stream timing follows the configured record length.
  void finalize();
  void validate() const;

  std::string to_json() const;
  static SimConfig from_json(const std::string& text);
  static SimConfig load(const std::string& path);  // empty path -> defaults

  /// FNV-1a hash of the canonical JSON form.
  uint64_t digest() const;
};

}  // namespace mmodsim
