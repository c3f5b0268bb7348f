#include "mmodsim/synth.hpp"

#include <algorithm>
#include <cmath>

#include "mmodsim/rng.hpp"

namespace mmodsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
}  // namespace

Material material_from_string(const std::string& s) {
  if (s == "SS" || s == "ss") return Material::SS;
  if (s == "Cu" || s == "cu") return Material::Cu;
  if (s == "Glass" || s == "glass") return Material::Glass;
  if (s == "Fe" || s == "fe") return Material::Fe;
  if (s == "Other" || s == "other") return Material::Other;
  throw std::invalid_argument("unknown material: " + s);
}

const char* material_name(Material m) {
  switch (m) {
    case Material::SS: return "SS";
    case Material::Cu: return "Cu";
    case Material::Glass: return "Glass";
    case Material::Fe: return "Fe";
    default: return "Other";
  }
}

void ImpactScenario::validate() const {
  if (speed <= 0.0) throw std::invalid_argument("speed must be > 0");
  if (std::fabs(aoa_x_deg) >= 90.0 || std::fabs(aoa_y_deg) >= 90.0)
    throw std::invalid_argument("|aoa| must be < 90 degrees");
  if (diameter < 25e-6 || diameter > 2.5e-3)
    throw std::invalid_argument("diameter outside the 25 um .. 2.5 mm envelope");
}

SynthConfig SynthConfig::defaults() { return SynthConfig{}; }

void SynthConfig::fit_stream(double record_duration_s) {
  impact_time = 0.30 * record_duration_s;
  stream_duration = impact_time + 1.10 * record_duration_s;
}

namespace {

struct WaveletShape {
  double t_on;        // s, envelope onset (absolute)
  double scale;       // peak amplitude after attenuation
  double attack;      // s
  double decay;       // s, including dispersion stretch
  double sweep_time;  // s, chirp duration
  double f_hi;        // Hz at onset
  double f_lo;        // Hz at end of sweep
};

WaveletShape wavelet_shape(double distance, double amplitude, const FilmProps& p,
                           double origin_time, double center_freq, double bandwidth) {
  WaveletShape w;
  w.t_on = origin_time + distance / p.group_speed;
  const double att_db = p.attenuation_coeff * (center_freq / 1e3) * distance;
  w.scale = amplitude * std::pow(10.0, -att_db / 20.0);
  const double spread =
      distance * p.dispersion_slope * (bandwidth / 1e3) / (p.group_speed * p.group_speed);
  w.attack = p.attack_time;
  w.decay = p.decay_time + spread;
  w.sweep_time = p.base_sweep_time + spread;
  w.f_hi = center_freq + 0.5 * bandwidth;
  w.f_lo = center_freq - 0.5 * bandwidth;
  return w;
}

// envelope (1 - e^{-s/a}) e^{-s/tau} peaks at s* = a ln((a + tau)/a)
double envelope_peak(double a, double tau) {
  const double s = a * std::log((a + tau) / a);
  return (1.0 - std::exp(-s / a)) * std::exp(-s / tau);
}

void add_wavelet(Waveform& wf, const WaveletShape& w) {
  if (wf.samples.empty()) return;
  const double dt = wf.dt();
  const double s_end = w.attack * 5.0 + w.decay * 10.0;
  const auto i_begin = static_cast<std::ptrdiff_t>(std::ceil((w.t_on - wf.t0) / dt));
  const auto i_end = static_cast<std::ptrdiff_t>(std::ceil((w.t_on + s_end - wf.t0) / dt));
  const auto lo = std::max<std::ptrdiff_t>(i_begin, 0);
  const auto hi = std::min<std::ptrdiff_t>(i_end, static_cast<std::ptrdiff_t>(wf.size()));
  if (lo >= hi) return;

  const double peak = envelope_peak(w.attack, w.decay);
  const double amp = w.scale / peak;
  const double sweep_rate = (w.f_hi - w.f_lo) / w.sweep_time;  // Hz/s downward
  for (std::ptrdiff_t i = lo; i < hi; ++i) {
    const double s = (wf.t0 + static_cast<double>(i) * dt) - w.t_on;
    const double env = (1.0 - std::exp(-s / w.attack)) * std::exp(-s / w.decay);
    double phase;
    if (s < w.sweep_time) {
      phase = 2.0 * kPi * (w.f_hi * s - 0.5 * sweep_rate * s * s);
    } else {
      const double base = w.f_hi * w.sweep_time - 0.5 * sweep_rate * w.sweep_time * w.sweep_time;
      phase = 2.0 * kPi * (base + w.f_lo * (s - w.sweep_time));
    }
    wf.samples[static_cast<std::size_t>(i)] += amp * env * std::sin(phase);
  }
}

Waveform blank(double sample_rate, double t_start, double t_end) {
  Waveform wf;
  wf.sample_rate = sample_rate;
  wf.t0 = t_start;
  const auto n = static_cast<std::size_t>(std::ceil((t_end - t_start) * sample_rate));
  wf.samples.assign(n, 0.0);
  return wf;
}

}  // namespace

Waveform propagate_waveform(Vec2 impact_point, double amplitude, Vec2 sensor_pos,
                            const FilmProps& props, double origin_time,
                            double sample_rate, double t_start, double t_end) {
  Waveform wf = blank(sample_rate, t_start, t_end);
  const double d = distance(impact_point, sensor_pos);
  add_wavelet(wf, wavelet_shape(d, amplitude, props, origin_time, props.center_freq,
                                props.burst_bandwidth));
  return wf;
}

PhysicalSignals simulate_shot(const ImpactScenario& scenario, const SensorGeometry& geom,
                              const GridLayout& layout, const SynthConfig& cfg) {
  scenario.validate();
  if (!geom.contains(scenario.entry_point))
    throw std::domain_error("entry point outside the active area");

  PhysicalSignals out;
  const double h = geom.layer_separation_h;
  out.true_hit_top = scenario.entry_point;
  out.true_hit_bottom = {scenario.entry_point.x + h * std::tan(scenario.aoa_x_deg * kDegToRad),
                         scenario.entry_point.y + h * std::tan(scenario.aoa_y_deg * kDegToRad)};
  if (!geom.contains(out.true_hit_bottom))
    throw std::domain_error("clipped transit: exit point misses the lower sheet");

  const Vec2 delta = out.true_hit_bottom - out.true_hit_top;
  out.path_length = std::sqrt(delta.dot(delta) + h * h);
  out.impact_time_top = cfg.impact_time;
  out.impact_time_bottom = cfg.impact_time + out.path_length / scenario.speed;
  out.break_state = traces_intersected(layout, scenario.entry_point, scenario.diameter);
  out.source_amplitude =
      cfg.amplitude.source_amplitude_volts(scenario.diameter, scenario.material);

  // clean signals
  double strongest_peak = 0.0;
  for (int layer = 0; layer < kLayers; ++layer) {
    const Vec2 hit = (layer == kTopLayer) ? out.true_hit_top : out.true_hit_bottom;
    const double t_hit = (layer == kTopLayer) ? out.impact_time_top : out.impact_time_bottom;
    const FilmProps& props = cfg.film[layer];
    for (int s = 0; s < kSensorsPerLayer; ++s) {
      Waveform& wf = out.waveforms[layer * kSensorsPerLayer + s];
      wf = blank(cfg.oversample_rate, 0.0, cfg.stream_duration);
      const double d = distance(hit, geom.sensor_positions[layer][s]);
      add_wavelet(wf, wavelet_shape(d, out.source_amplitude, props, t_hit,
                                    props.center_freq, props.burst_bandwidth));
      strongest_peak = std::max(strongest_peak, out.source_amplitude * props.attenuation_scale(d));
    }
  }

  // white noise sized against the strongest sensor peak
  double sigma = cfg.noise_rms_volts;
  if (std::isfinite(scenario.snr_target_db)) {
    sigma = strongest_peak / std::pow(10.0, scenario.snr_target_db / 20.0);
  }
  out.noise_rms = sigma;
  if (sigma > 0.0) {
    for (int ch = 0; ch < kLayers * kSensorsPerLayer; ++ch) {
      Rng rng(mix_seed(scenario.rng_seed, 0x100 + static_cast<uint64_t>(ch)));
      for (double& v : out.waveforms[ch].samples) v += sigma * rng.gaussian();
    }
  }
  return out;
}

std::array<Waveform, kSensorsPerLayer> piezo_pulse(int layer, const SensorGeometry& geom,
                                                   const SynthConfig& cfg,
                                                   double fire_time, double t_start,
                                                   double t_end) {
  std::array<Waveform, kSensorsPerLayer> out;
  const Vec2 src = geom.piezo_position[layer];
  for (int s = 0; s < kSensorsPerLayer; ++s) {
    Waveform wf = blank(cfg.oversample_rate, t_start, t_end);
    const double d = distance(src, geom.sensor_positions[layer][s]);
    add_wavelet(wf, wavelet_shape(d, cfg.piezo_amplitude, cfg.film[layer], fire_time,
                                  cfg.piezo_center_freq, cfg.piezo_bandwidth));
    out[s] = std::move(wf);
  }
  return out;
}

std::array<double, 8> thermistor_readout(const std::array<double, 8>& corner_temps_c,
                                         double noise_sigma_c, uint64_t rng_seed) {
  for (double t : corner_temps_c) {
    if (t < -60.0 || t > 95.0)
      throw std::out_of_range("thermistor temperature outside -60..+95 degC");
  }
  std::array<double, 8> out{};
  Rng rng(mix_seed(rng_seed, 0x7e));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = corner_temps_c[i] + noise_sigma_c * rng.gaussian();
  return out;
}

}  // namespace mmodsim
