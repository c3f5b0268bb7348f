#include "mmodsim/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

namespace mmodsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 4-term minimum-sidelobe Blackman-Harris
void fill_window(std::vector<double>& w) {
  const double a0 = 0.35875, a1 = 0.48829, a2 = 0.14128, a3 = 0.01168;
  const auto n = w.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    w[i] = a0 - a1 * std::cos(x) + a2 * std::cos(2.0 * x) - a3 * std::cos(3.0 * x);
  }
}

// half-width of the exclusion lobe around a coherent tone, in bins
constexpr int kLobe = 6;

double lin_to_db(double p) {
  return 10.0 * std::log10(std::max(p, 1e-300));
}

int fold_to_nyquist(double f, double fs, double df) {
  double g = std::fmod(f, fs);
  if (g < 0.0) g += fs;
  if (g > 0.5 * fs) g = fs - g;
  return static_cast<int>(std::lround(g / df));
}

}  // namespace

double SpectrumResult::integrate_lobe(int center_bin, int half_width) const {
  const int n = static_cast<int>(p_linear.size());
  double acc = 0.0;
  for (int b = std::max(0, center_bin - half_width);
       b <= std::min(n - 1, center_bin + half_width); ++b)
    acc += p_linear[static_cast<std::size_t>(b)];
  return acc / enbw_bins;
}

double SpectrumResult::dbfs(double linear_power) const { return lin_to_db(linear_power); }

SpectrumResult compute_spectrum(const DigitizedRecord& rec, double lsb, double full_scale) {
  const std::size_t n = rec.samples.size();
  if (n < 64) throw std::invalid_argument("record too short for spectral analysis");

  SpectrumResult sp;
  std::vector<double> w(n);
  fill_window(w);
  double sum_w = 0.0, sum_w2 = 0.0;
  for (double v : w) {
    sum_w += v;
    sum_w2 += v * v;
  }
  sp.coherent_gain = sum_w / static_cast<double>(n);
  sp.enbw_bins = static_cast<double>(n) * sum_w2 / (sum_w * sum_w);
  sp.full_scale_power = 0.5 * (0.5 * full_scale) * (0.5 * full_scale);

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = static_cast<double>(rec.samples[i]) * lsb * w[i];

  const std::size_t n_out = n / 2 + 1;
  std::vector<std::complex<double>> spec(n_out);
  fftw_plan plan = fftw_plan_dft_r2c_1d(
      static_cast<int>(n), x.data(), reinterpret_cast<fftw_complex*>(spec.data()),
      FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  const double fs = 1.0 / rec.sample_period;
  sp.bin_width = fs / static_cast<double>(n);
  sp.freq.resize(n_out);
  sp.p_linear.resize(n_out);
  sp.power_db.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    sp.freq[k] = static_cast<double>(k) * sp.bin_width;
    const double mag2 = std::norm(spec[k]);
    // one-sided coherent power, normalized so a full-scale sine at a bin
    // center reads 1.0 (= 0 dBFS)
    const double two_sided = mag2 / (sum_w * sum_w);
    const bool edge = (k == 0) || (2 * k == n);
    const double p = (edge ? 1.0 : 2.0) * two_sided / sp.full_scale_power;
    sp.p_linear[k] = p;
    sp.power_db[k] = lin_to_db(p);
  }

  double total = std::accumulate(sp.p_linear.begin(), sp.p_linear.end(), 0.0);
  sp.total_power_dbfs = lin_to_db(total / sp.enbw_bins);

  // fundamental: strongest bin clear of dc
  int fund = -1;
  double best = -1.0;
  for (std::size_t k = kLobe + 1; k < n_out; ++k) {
    if (sp.p_linear[k] > best) {
      best = sp.p_linear[k];
      fund = static_cast<int>(k);
    }
  }
  sp.fundamental_bin = fund;
  if (fund > 0) {
    const double f1 = sp.freq[static_cast<std::size_t>(fund)];
    for (int h = 2; h <= 7; ++h)
      sp.harmonic_bins.push_back(fold_to_nyquist(h * f1, fs, sp.bin_width));
  }
  return sp;
}

namespace {

// median of per-bin powers, for the dominant-tone validity check
double median_bin_power(const std::vector<double>& p) {
  std::vector<double> tmp(p.begin() + 1, p.end());
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2),
                   tmp.end());
  return tmp[tmp.size() / 2];
}

}  // namespace

SingleToneMetrics single_tone_metrics(const DigitizedRecord& rec, const AcsConfig& cfg) {
  const SpectrumResult sp = compute_spectrum(rec, cfg.lsb(), cfg.full_scale);
  const int n = static_cast<int>(sp.p_linear.size());
  const int fund = sp.fundamental_bin;
  if (fund < 0) throw std::runtime_error("invalid stimulus: no tone found");

  const double p_fund = sp.integrate_lobe(fund, kLobe);
  const double med = median_bin_power(sp.p_linear);
  if (sp.p_linear[static_cast<std::size_t>(fund)] < 100.0 * med)
    throw std::runtime_error("invalid stimulus: fundamental under 20 dB above the median bin");

  std::vector<bool> excluded(static_cast<std::size_t>(n), false);
  auto exclude = [&](int center) {
    for (int b = std::max(0, center - kLobe); b <= std::min(n - 1, center + kLobe); ++b)
      excluded[static_cast<std::size_t>(b)] = true;
  };
  for (int b = 0; b <= kLobe; ++b) excluded[static_cast<std::size_t>(b)] = true;  // dc
  exclude(fund);
  double p_harm = 0.0;
  for (int hb : sp.harmonic_bins) {
    if (std::abs(hb - fund) <= kLobe) continue;  // harmonic aliased onto the fundamental
    p_harm += sp.integrate_lobe(hb, kLobe);
    exclude(hb);
  }

  double p_noise = 0.0;
  for (int b = 0; b < n; ++b)
    if (!excluded[static_cast<std::size_t>(b)]) p_noise += sp.p_linear[static_cast<std::size_t>(b)];
  p_noise /= sp.enbw_bins;

  // strongest spur: any non-dc, non-fundamental peak (harmonics included)
  int spur = -1;
  double spur_peak = -1.0;
  for (int b = kLobe + 1; b < n; ++b) {
    if (std::abs(b - fund) <= kLobe) continue;
    if (sp.p_linear[static_cast<std::size_t>(b)] > spur_peak) {
      spur_peak = sp.p_linear[static_cast<std::size_t>(b)];
      spur = b;
    }
  }
  const double p_spur = (spur >= 0) ? sp.integrate_lobe(spur, kLobe) : 0.0;

  SingleToneMetrics m;
  m.fundamental_freq = sp.freq[static_cast<std::size_t>(fund)];
  m.fundamental_dbfs = lin_to_db(p_fund);
  m.snrfs_db = lin_to_db(p_fund / p_noise);
  m.sinad_db = lin_to_db(p_fund / (p_noise + p_harm));
  m.enob_bits = enob_from_sinad(m.sinad_db);
  m.sfdr_db = lin_to_db(p_fund / std::max(p_spur, 1e-300));
  return m;
}

Ip3Result two_tone_ip3(const DigitizedRecord& rec, double f1, double f2,
                       const AcsConfig& cfg) {
  const SpectrumResult sp = compute_spectrum(rec, cfg.lsb(), cfg.full_scale);
  const double fs = 1.0 / rec.sample_period;
  const double df = sp.bin_width;
  if (std::fabs(f2 - f1) < 2.0 * kLobe * df)
    throw std::invalid_argument("tones not resolvable at this record length");

  auto lobe_at = [&](double f) { return sp.integrate_lobe(fold_to_nyquist(f, fs, df), kLobe); };
  const double p1 = lobe_at(f1);
  const double p2 = lobe_at(f2);
  const double tone = 0.5 * (p1 + p2);

  const double im_lo = lobe_at(2.0 * f1 - f2);
  const double im_hi = lobe_at(2.0 * f2 - f1);
  const double im3 = std::max(im_lo, im_hi);

  // local noise floor from bins away from the tones and their products
  std::vector<double> quiet;
  const int b1 = fold_to_nyquist(f1, fs, df), b2 = fold_to_nyquist(f2, fs, df);
  const int bl = fold_to_nyquist(2.0 * f1 - f2, fs, df), bh = fold_to_nyquist(2.0 * f2 - f1, fs, df);
  for (int b = kLobe + 1; b < static_cast<int>(sp.p_linear.size()); ++b) {
    if (std::abs(b - b1) <= kLobe || std::abs(b - b2) <= kLobe || std::abs(b - bl) <= kLobe ||
        std::abs(b - bh) <= kLobe)
      continue;
    quiet.push_back(sp.p_linear[static_cast<std::size_t>(b)]);
  }
  std::nth_element(quiet.begin(), quiet.begin() + static_cast<std::ptrdiff_t>(quiet.size() / 2),
                   quiet.end());
  const double floor_per_bin = quiet.empty() ? 0.0 : quiet[quiet.size() / 2];
  const double floor_lobe = floor_per_bin * (2.0 * kLobe + 1.0) / sp.enbw_bins;

  Ip3Result out;
  out.tone_dbfs = lin_to_db(tone);
  out.im3_dbfs = lin_to_db(im3);
  if (im3 < 2.0 * floor_lobe) {
    out.noise_limited = true;
    // reporting a lower bound with IM3 pinned at the floor
    out.ip3_dbfs = out.tone_dbfs + 0.5 * (out.tone_dbfs - lin_to_db(std::max(floor_lobe, 1e-300)));
    return out;
  }
  out.ip3_dbfs = out.tone_dbfs + 0.5 * (out.tone_dbfs - out.im3_dbfs);
  return out;
}

double mds_sweep(const std::function<DigitizedRecord(double)>& generator,
                 const AcsConfig& cfg, double step_db, double floor_db) {
  if (step_db <= 0.0) throw std::invalid_argument("step_db must be > 0");

  auto detectable = [&](double level_db, int* tone_bin) {
    const DigitizedRecord rec = generator(level_db);
    const SpectrumResult sp = compute_spectrum(rec, cfg.lsb(), cfg.full_scale);
    // expected tone position: strongest bin on the first pass
    int bin = *tone_bin;
    if (bin < 0) {
      double best = -1.0;
      for (std::size_t k = kLobe + 1; k < sp.p_linear.size(); ++k)
        if (sp.p_linear[k] > best) {
          best = sp.p_linear[k];
          bin = static_cast<int>(k);
        }
      *tone_bin = bin;
    }
    std::vector<double> others;
    for (int b = kLobe + 1; b < static_cast<int>(sp.p_linear.size()); ++b)
      if (std::abs(b - bin) > kLobe) others.push_back(sp.p_linear[static_cast<std::size_t>(b)]);
    std::nth_element(others.begin(),
                     others.begin() + static_cast<std::ptrdiff_t>(others.size() / 2),
                     others.end());
    const double floor_bin = others[others.size() / 2];
    const double tone_bin_power = sp.p_linear[static_cast<std::size_t>(bin)];
    return tone_bin_power >= 2.0 * floor_bin;  // 3 dB over the floor in its bin
  };

  int tone_bin = -1;
  if (!detectable(0.0, &tone_bin))
    throw std::runtime_error("tone undetectable at 0 dBFS: bad channel configuration");

  double level = 0.0;
  while (level - step_db >= floor_db) {
    if (!detectable(level - step_db, &tone_bin)) return level;
    level -= step_db;
  }
  return level;
}

RmseResult waveform_rmse(const Waveform& reference, const DigitizedRecord& test, double lsb) {
  const double ref_peak = reference.peak_abs();
  if (ref_peak <= 0.0) throw std::domain_error("zero-amplitude reference");

  // reference resampled at the test record instants
  const std::size_t n = test.samples.size();
  std::vector<double> ref(n), got(n);
  for (std::size_t i = 0; i < n; ++i) {
    ref[i] = reference.value_at(test.time_at(i));
    got[i] = static_cast<double>(test.samples[i]) * lsb;
  }

  const int max_lag = static_cast<int>(n / 8);
  double best = std::numeric_limits<double>::infinity();
  int best_lag = 0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::ptrdiff_t>(i) + lag;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
      const double d = ref[i] - got[static_cast<std::size_t>(j)];
      acc += d * d;
      ++count;
    }
    if (count == 0) continue;
    const double mse = acc / static_cast<double>(count);
    if (mse < best) {
      best = mse;
      best_lag = lag;
    }
  }
  RmseResult out;
  out.lag_samples = best_lag;
  out.rmse_percent = 100.0 * std::sqrt(best) / ref_peak;
  return out;
}

}  // namespace mmodsim
