#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mmodsim/geometry.hpp"
#include "mmodsim/waveform.hpp"

namespace mmodsim {

/// Acoustic-chain settings: high-pass, 8-to-1 MUX into one 12-bit ADC,
/// FIFO trigger capture with a pre-trigger fraction.
struct AcsConfig {
  double hp_cutoff = 11e3;        // Hz
  double mux_rate = 4e6;          // Hz, channel switch rate
  int channels = 8;
  int adc_bits = 12;
  double full_scale = 3.7;        // V peak-to-peak
  int record_len = 16384;         // samples per channel (1000 in low-velocity mode)
  double pretrigger_fraction = 0.10;
  int trigger_threshold = 0;      // ADC counts; <= 0 means "derive from noise"
  double trigger_sigma = 5.0;     // threshold = trigger_sigma * noise rms when derived

  double per_channel_rate() const { return mux_rate / channels; }
  double sample_period() const { return 1.0 / per_channel_rate(); }
  double lsb() const { return full_scale / static_cast<double>(1 << adc_bits); }
  int code_min() const { return -(1 << (adc_bits - 1)); }
  int code_max() const { return (1 << (adc_bits - 1)) - 1; }
  int pretrigger_samples() const {
    return static_cast<int>(pretrigger_fraction * record_len);
  }
  int resolve_threshold(double noise_rms_volts) const;
  void validate() const;
};

/// One channel of a captured event.
struct DigitizedRecord {
  int channel = 0;
  double t0 = 0.0;             // s, absolute time of samples[0] (skew included)
  double sample_period = 0.0;  // s
  double channel_skew = 0.0;   // s, channel * 1/mux_rate
  std::vector<int16_t> samples;

  double time_at(std::size_t i) const {
    return t0 + static_cast<double>(i) * sample_period;
  }
  /// Dequantized trace in volts.
  Waveform to_waveform(double lsb) const;
};

/// Serialized little-endian: channel u8, t0 f64, period f64, count u32,
/// then samples as signed 16-bit.
void write_record(std::ostream& os, const DigitizedRecord& rec);
DigitizedRecord read_record(std::istream& is);

/// Continuous multiplexed sampling of a common stream, before triggering.
struct SampledStream {
  std::array<std::vector<int16_t>, 8> channels;
  double start_time = 0.0;     // s, channel-0 sample 0
  double sample_period = 0.0;  // s per channel
  double mux_period = 0.0;     // s between adjacent channel slots
  std::size_t length() const { return channels[0].size(); }
};

/// Second-order high-pass (Butterworth, -3 dB at cfg.hp_cutoff).
Waveform highpass(const Waveform& w, const AcsConfig& cfg);

/// Sample channel k at t = k/mux_rate + m/per_channel_rate, quantize
/// mid-tread to adc_bits over full_scale, clamping out-of-range values.
SampledStream interleave_and_digitize(const std::array<Waveform, 8>& waveforms,
                                      const AcsConfig& cfg);

/// FIFO trigger: emits one capture per threshold crossing, record_len
/// samples per channel with the configured pre-trigger fraction. The
/// pre-trigger segment never reaches before the stream start (clamped).
/// Retrigger holdoff is one full record.
std::vector<std::array<DigitizedRecord, 8>> trigger_capture(const SampledStream& stream,
                                                            const AcsConfig& cfg);

/// Resistive-grid chain: 3 mA source, sum/difference amplifiers,
/// 16-to-1 MUX, 4096-sample averaging on a 12-bit ADC.
struct RgsConfig {
  double source_current = 3e-3;       // A
  double current_tempco = 0.4e-6;     // 1/degC, residual after compensation
  double electronics_temp_c = 25.0;   // chamber temperature of the board
  double sum_gain = 2.0;
  double sum_offset_volts = 3.0;      // subtracted before the sum gain
  double diff_gain = 5.0;
  int adc_bits = 12;
  double full_scale = 3.7;            // V peak-to-peak, same converter family
  int averages = 4096;
  double noise_ohms_rms = 0.3;        // single-sample, resistance-referred
  double thermistor_volts_per_c = 0.012;
  double thermistor_offset_c = 17.5;  // volts = (T - offset) * volts_per_c

  double lsb() const { return full_scale / static_cast<double>(1 << adc_bits); }
  int code_min() const { return -(1 << (adc_bits - 1)); }
  int code_max() const { return (1 << (adc_bits - 1)) - 1; }
  double current_at(double temp_c) const {
    return source_current * (1.0 + current_tempco * (temp_c - 25.0));
  }
};

/// Averaged sum/difference counts and derived resistances for one quadrant.
struct QuadrantMeasurement {
  double sum_counts = 0.0;   // mean of 4096 quantized samples
  double diff_counts = 0.0;
  double r_a = 0.0;          // ohm, derived as (S+D)/2
  double r_b = 0.0;          // ohm, derived as (S-D)/2
  bool open_circuit = false; // either subgrid open; counts saturated
};

struct GridMeasurement {
  std::array<QuadrantMeasurement, kQuadrants> quadrants{};
  std::array<double, 8> thermistor_counts{};
  double timestamp = 0.0;          // s
  double channel_scan_period = 0.0;  // s between MUX steps (16 channels total)
};

/// Measure both subgrids of every quadrant plus the eight thermistors.
/// temp_delta_c is the grid temperature offset from nominal (trace TCR);
/// the board temperature lives in cfg.electronics_temp_c.
GridMeasurement rgs_measure(const BreakState& breaks, const GridLayout& layout,
                            double temp_delta_c, const RgsConfig& cfg,
                            const std::array<double, 8>& thermistor_temps_c,
                            uint64_t rng_seed, double timestamp = 0.0);

/// One sum/difference pair through the amplifier + averaged-ADC chain.
/// Open inputs (nullopt) saturate the counts and set the flag.
QuadrantMeasurement rgs_measure_pair(std::optional<double> r_a_ohm,
                                     std::optional<double> r_b_ohm,
                                     const RgsConfig& cfg, uint64_t rng_seed);

double thermistor_counts_to_c(double counts, const RgsConfig& cfg);

}  // namespace mmodsim
