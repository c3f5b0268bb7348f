#include "mmodsim/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "mmodsim/rng.hpp"

namespace mmodsim {

namespace {
constexpr double kPi = 3.14159265358979323846;

int quantize(double volts, double lsb, int code_min, int code_max) {
  const double code = std::nearbyint(volts / lsb);
  if (code <= static_cast<double>(code_min)) return code_min;
  if (code >= static_cast<double>(code_max)) return code_max;
  return static_cast<int>(code);
}

template <typename T>
void put_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  // this code targets little-endian hosts; byte order is the wire order
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

int AcsConfig::resolve_threshold(double noise_rms_volts) const {
  if (trigger_threshold > 0) return trigger_threshold;
  const int derived = static_cast<int>(std::lround(trigger_sigma * noise_rms_volts / lsb()));
  return std::max(derived, 1);
}

void AcsConfig::validate() const {
  if (channels != 8) throw std::invalid_argument("ACS model is fixed at 8 channels");
  if (mux_rate <= 0.0 || hp_cutoff <= 0.0) throw std::invalid_argument("bad ACS rates");
  if (pretrigger_fraction <= 0.0 || pretrigger_fraction >= 1.0)
    throw std::invalid_argument("pretrigger_fraction must be in (0, 1)");
  if (record_len <= 0) throw std::invalid_argument("record_len must be > 0");
}

Waveform DigitizedRecord::to_waveform(double lsb) const {
  Waveform w;
  w.sample_rate = 1.0 / sample_period;
  w.t0 = t0;
  w.samples.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    w.samples[i] = static_cast<double>(samples[i]) * lsb;
  return w;
}

void write_record(std::ostream& os, const DigitizedRecord& rec) {
  put_le<uint8_t>(os, static_cast<uint8_t>(rec.channel));
  put_le<double>(os, rec.t0);
  put_le<double>(os, rec.sample_period);
  put_le<uint32_t>(os, static_cast<uint32_t>(rec.samples.size()));
  for (int16_t s : rec.samples) put_le<int16_t>(os, s);
}

DigitizedRecord read_record(std::istream& is) {
  DigitizedRecord rec;
  rec.channel = get_le<uint8_t>(is);
  rec.t0 = get_le<double>(is);
  rec.sample_period = get_le<double>(is);
  const auto count = get_le<uint32_t>(is);
  if (!is) throw std::runtime_error("truncated record header");
  rec.samples.resize(count);
  for (auto& s : rec.samples) s = get_le<int16_t>(is);
  if (!is) throw std::runtime_error("truncated record payload");
  return rec;
}

Waveform highpass(const Waveform& w, const AcsConfig& cfg) {
  // bilinear-transform Butterworth high-pass, prewarped at the cutoff
  const double k = std::tan(kPi * cfg.hp_cutoff / w.sample_rate);
  const double q = 1.0 / std::sqrt(2.0);
  const double norm = 1.0 / (1.0 + k / q + k * k);
  const double b0 = norm;
  const double b1 = -2.0 * norm;
  const double b2 = norm;
  const double a1 = 2.0 * (k * k - 1.0) * norm;
  const double a2 = (1.0 - k / q + k * k) * norm;

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.t0 = w.t0;
  out.samples.resize(w.samples.size());
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const double x = w.samples[i];
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    out.samples[i] = y;
  }
  return out;
}

SampledStream interleave_and_digitize(const std::array<Waveform, 8>& waveforms,
                                      const AcsConfig& cfg) {
  cfg.validate();
  SampledStream stream;
  stream.start_time = waveforms[0].t0;
  stream.sample_period = cfg.sample_period();
  stream.mux_period = 1.0 / cfg.mux_rate;
  const double lsb = cfg.lsb();
  const int lo = cfg.code_min(), hi = cfg.code_max();

  const double end = waveforms[0].end_time();
  const auto n = static_cast<std::size_t>(
      std::max(0.0, std::floor((end - stream.start_time) / stream.sample_period)));
  for (int ch = 0; ch < 8; ++ch) {
    const Waveform& w = waveforms[ch];
    auto& codes = stream.channels[ch];
    codes.resize(n);
    const double skew = ch * stream.mux_period;
    for (std::size_t m = 0; m < n; ++m) {
      const double t = stream.start_time + skew + static_cast<double>(m) * stream.sample_period;
      codes[m] = static_cast<int16_t>(quantize(w.value_at(t), lsb, lo, hi));
    }
  }
  return stream;
}

std::vector<std::array<DigitizedRecord, 8>> trigger_capture(const SampledStream& stream,
                                                            const AcsConfig& cfg) {
  std::vector<std::array<DigitizedRecord, 8>> captures;
  const int threshold = cfg.trigger_threshold > 0 ? cfg.trigger_threshold : 1;
  const auto n = static_cast<std::ptrdiff_t>(stream.length());
  const auto rec_len = static_cast<std::ptrdiff_t>(cfg.record_len);
  const auto pre = static_cast<std::ptrdiff_t>(cfg.pretrigger_samples());

  std::ptrdiff_t m = 0;
  while (m < n) {
    bool hit = false;
    for (int ch = 0; ch < 8 && !hit; ++ch) {
      const int v = stream.channels[ch][static_cast<std::size_t>(m)];
      hit = v >= threshold || v <= -threshold;
    }
    if (!hit) {
      ++m;
      continue;
    }
    // clamp the pre-trigger segment at the stream start
    std::ptrdiff_t begin = m - pre;
    if (begin < 0) begin = 0;
    std::ptrdiff_t endi = begin + rec_len;
    if (endi > n) {
      endi = n;
      begin = std::max<std::ptrdiff_t>(0, endi - rec_len);
    }
    std::array<DigitizedRecord, 8> capture;
    for (int ch = 0; ch < 8; ++ch) {
      DigitizedRecord& rec = capture[ch];
      rec.channel = ch;
      rec.sample_period = stream.sample_period;
      rec.channel_skew = ch * stream.mux_period;
      rec.t0 = stream.start_time + rec.channel_skew +
               static_cast<double>(begin) * stream.sample_period;
      rec.samples.assign(stream.channels[ch].begin() + begin,
                         stream.channels[ch].begin() + endi);
    }
    captures.push_back(std::move(capture));
    m = begin + rec_len;  // holdoff: one full record
  }
  return captures;
}

QuadrantMeasurement rgs_measure_pair(std::optional<double> r_a_ohm,
                                     std::optional<double> r_b_ohm,
                                     const RgsConfig& cfg, uint64_t rng_seed) {
  QuadrantMeasurement q;
  const double lsb = cfg.lsb();
  const int lo = cfg.code_min(), hi = cfg.code_max();
  const double current = cfg.current_at(cfg.electronics_temp_c);

  if (!r_a_ohm.has_value() || !r_b_ohm.has_value()) {
    q.open_circuit = true;
    q.sum_counts = static_cast<double>(hi);
    q.diff_counts = static_cast<double>(r_a_ohm.has_value() ? lo : hi);
    q.r_a = q.r_b = 0.0;
    return q;
  }

  const double va = current * (*r_a_ohm);
  const double vb = current * (*r_b_ohm);
  const double noise_v = cfg.noise_ohms_rms * cfg.source_current;

  Rng rng(mix_seed(rng_seed, 0x365));
  double sum_acc = 0.0, diff_acc = 0.0;
  for (int i = 0; i < cfg.averages; ++i) {
    const double na = noise_v * rng.gaussian();
    const double nb = noise_v * rng.gaussian();
    const double v_sum = ((va + na) + (vb + nb) - cfg.sum_offset_volts) * cfg.sum_gain;
    const double v_diff = ((va + na) - (vb + nb)) * cfg.diff_gain;
    sum_acc += quantize(v_sum, lsb, lo, hi);
    diff_acc += quantize(v_diff, lsb, lo, hi);
  }
  q.sum_counts = sum_acc / cfg.averages;
  q.diff_counts = diff_acc / cfg.averages;

  // invert the chain with the nominal current
  const double v_sum = q.sum_counts * lsb / cfg.sum_gain + cfg.sum_offset_volts;
  const double v_diff = q.diff_counts * lsb / cfg.diff_gain;
  const double s = v_sum / cfg.source_current;   // (A + B) in ohm
  const double d = v_diff / cfg.source_current;  // (A - B) in ohm
  q.r_a = 0.5 * (s + d);
  q.r_b = 0.5 * (s - d);
  return q;
}

GridMeasurement rgs_measure(const BreakState& breaks, const GridLayout& layout,
                            double temp_delta_c, const RgsConfig& cfg,
                            const std::array<double, 8>& thermistor_temps_c,
                            uint64_t rng_seed, double timestamp) {
  GridMeasurement gm;
  gm.timestamp = timestamp;
  gm.channel_scan_period = cfg.averages * 2e-6;  // 4096 conversions per channel at 500 kHz
  for (int q = 0; q < kQuadrants; ++q) {
    const auto r_a = subgrid_resistance(layout, breaks.broken[q][0], temp_delta_c);
    const auto r_b = subgrid_resistance(layout, breaks.broken[q][1], temp_delta_c);
    gm.quadrants[q] = rgs_measure_pair(r_a, r_b, cfg, mix_seed(rng_seed, 0x200 + q));
  }
  const double lsb = cfg.lsb();
  const int lo = cfg.code_min(), hi = cfg.code_max();
  Rng rng(mix_seed(rng_seed, 0x300));
  for (int i = 0; i < 8; ++i) {
    const double v = (thermistor_temps_c[i] - cfg.thermistor_offset_c) * cfg.thermistor_volts_per_c;
    double acc = 0.0;
    for (int k = 0; k < cfg.averages; ++k)
      acc += quantize(v + 0.5e-3 * rng.gaussian(), lsb, lo, hi);
    gm.thermistor_counts[i] = acc / cfg.averages;
  }
  return gm;
}

double thermistor_counts_to_c(double counts, const RgsConfig& cfg) {
  return counts * cfg.lsb() / cfg.thermistor_volts_per_c + cfg.thermistor_offset_c;
}

}  // namespace mmodsim
