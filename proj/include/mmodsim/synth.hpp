#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include "mmodsim/geometry.hpp"
#include "mmodsim/waveform.hpp"

namespace mmodsim {

enum class Material : uint8_t { SS = 0, Cu, Glass, Fe, Other };

Material material_from_string(const std::string& s);
const char* material_name(Material m);

/// Ground truth for one shot. aoa 0 degrees is normal incidence; the
/// particle crosses from the top (resistive-grid) sheet to the bottom one.
struct ImpactScenario {
  int shot_id = 0;
  Material material = Material::Other;
  double diameter = 0.0;   // m
  double speed = 0.0;      // m/s
  double aoa_x_deg = 0.0;
  double aoa_y_deg = 0.0;
  Vec2 entry_point{};      // on the top layer
  // NaN means "derive the noise floor from the amplitude law"
  double snr_target_db = std::numeric_limits<double>::quiet_NaN();
  uint64_t rng_seed = 0;

  void validate() const;
};

/// Film propagation model. The source wavelet is a windowed downward
/// chirp: high-frequency components lead, the envelope decays roughly
/// exponentially, and the decay stretches with travel distance as the
/// band disperses.
struct FilmProps {
  double group_speed = 2360.0;      // m/s, envelope speed
  double dispersion_slope = 2.0;    // (m/s) per kHz above center
  double attenuation_coeff = 0.15;  // dB per (m * kHz)
  double center_freq = 60e3;        // Hz
  double burst_bandwidth = 60e3;    // Hz
  double attack_time = 1e-6;        // s, envelope rise
  double decay_time = 25e-6;        // s, envelope decay at zero distance
  double base_sweep_time = 100e-6;  // s, chirp sweep duration at zero distance

  /// Added envelope/chirp stretch per meter traveled:
  /// d * slope * bandwidth_kHz / group_speed^2.
  double spread_per_meter() const {
    return dispersion_slope * (burst_bandwidth / 1e3) / (group_speed * group_speed);
  }
  /// Peak-amplitude attenuation factor after distance_m of travel,
  /// evaluated at the center frequency.
  double attenuation_scale(double distance_m) const {
    return std::pow(10.0, -attenuation_coeff * (center_freq / 1e3) * distance_m / 20.0);
  }
};

/// Log-linear source amplitude vs particle diameter, with per-material
/// offsets. Defaults are calibrated so the 50 um Fe and 304 um glass
/// reference shots come out near 24 dB and 13 dB SNR on the default
/// sensor layout.
struct AmplitudeLaw {
  double ref_diameter = 100e-6;        // m
  double slope_db_per_decade = -3.0;   // amplitude falls slowly with size
  std::array<double, 5> material_db{-12.2, -7.0, -14.2, -5.1, -10.0};  // SS,Cu,Glass,Fe,Other

  double source_amplitude_volts(double diameter, Material m) const {
    const double db = material_db[static_cast<int>(m)] +
                      slope_db_per_decade * std::log10(diameter / ref_diameter);
    return std::pow(10.0, db / 20.0);
  }
};

struct SynthConfig {
  std::array<FilmProps, kLayers> film{FilmProps{}, FilmProps{1900.0}};  // top, bottom
  AmplitudeLaw amplitude;
  double oversample_rate = 8e6;       // Hz, internal time base
  double noise_rms_volts = 0.030;     // sensor-referred white noise
  double impact_time = 10e-3;        // s into the stream
  double stream_duration = 45e-3;    // s
  double piezo_center_freq = 20e3;   // Hz
  double piezo_bandwidth = 2e3;      // Hz
  double piezo_amplitude = 1.0;      // V at source
  double thermistor_noise_c = 0.05;  // degC rms

  static SynthConfig defaults();
  /// Pick stream timing that fits one captured record of the given length.
  void fit_stream(double record_duration_s);
};

/// Continuous-domain outputs of one synthesized shot.
struct PhysicalSignals {
  std::array<Waveform, kLayers * kSensorsPerLayer> waveforms{};  // 0-3 top, 4-7 bottom
  BreakState break_state;
  double impact_time_top = 0.0;     // t1
  double impact_time_bottom = 0.0;  // t2
  Vec2 true_hit_top{};
  Vec2 true_hit_bottom{};
  double noise_rms = 0.0;          // sigma actually injected
  double source_amplitude = 0.0;   // V, before propagation loss
  double path_length = 0.0;        // m between the two hits
};

/// Band-limited transient as seen at sensor_pos for a source at
/// impact_point firing at origin_time. The energy envelope turns on at
/// origin_time + distance / group_speed exactly.
Waveform propagate_waveform(Vec2 impact_point, double amplitude, Vec2 sensor_pos,
                            const FilmProps& props, double origin_time,
                            double sample_rate, double t_start, double t_end);

/// Full forward model for one shot: eight sensor waveforms with noise,
/// severed traces from the entry hole, and the ground-truth hit record.
/// Throws std::domain_error if the transit exits the bottom sheet
/// ("clipped transit").
PhysicalSignals simulate_shot(const ImpactScenario& scenario, const SensorGeometry& geom,
                              const GridLayout& layout, const SynthConfig& cfg);

/// 20-kHz calibration burst from the layer's piezo disk to its four sensors.
std::array<Waveform, kSensorsPerLayer> piezo_pulse(int layer, const SensorGeometry& geom,
                                                   const SynthConfig& cfg,
                                                   double fire_time, double t_start,
                                                   double t_end);

/// Eight corner thermistor readings (4 per layer) with sensor noise.
/// Throws std::out_of_range outside the -60..+95 degC operating envelope.
std::array<double, 8> thermistor_readout(const std::array<double, 8>& corner_temps_c,
                                         double noise_sigma_c, uint64_t rng_seed);

}  // namespace mmodsim
