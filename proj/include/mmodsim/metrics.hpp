#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmodsim/acquisition.hpp"
#include "mmodsim/waveform.hpp"

namespace mmodsim {

/// Windowed one-sided power spectrum of a digitized record.
///
/// power_db is per-bin and coherent-gain corrected, so a bin-centered tone
/// reads its true level; integrated powers (tone lobes, noise totals)
/// divide the bin sums by the window's equivalent noise bandwidth, so a
/// full-scale sine integrates to 0 dBFS.
struct SpectrumResult {
  std::vector<double> freq;      // Hz
  std::vector<double> power_db;  // dBFS per bin
  int fundamental_bin = -1;
  std::vector<int> harmonic_bins;  // 2nd..7th, aliased into the first Nyquist zone
  std::string window = "blackman-harris-4";
  double coherent_gain = 0.0;
  double enbw_bins = 0.0;        // equivalent noise bandwidth in bins
  double total_power_dbfs = 0.0; // integrated, including dc
  double bin_width = 0.0;        // Hz

  // integrated linear powers, normalized to full-scale sine power = 1
  std::vector<double> p_linear;  // per bin, before the ENBW division
  double full_scale_power = 0.0; // (FS/2)^2 / 2 in V^2

  double integrate_lobe(int center_bin, int half_width) const;
  double dbfs(double linear_power) const;
};

SpectrumResult compute_spectrum(const DigitizedRecord& rec, double lsb, double full_scale);

struct SingleToneMetrics {
  double snrfs_db = 0.0;
  double sinad_db = 0.0;
  double enob_bits = 0.0;
  double sfdr_db = 0.0;
  double fundamental_freq = 0.0;
  double fundamental_dbfs = 0.0;
};

/// sinad -> effective bits, (sinad - 1.76) / 6.02
inline double enob_from_sinad(double sinad_db) { return (sinad_db - 1.76) / 6.02; }

/// Single-tone FFT metrics. Noise excludes dc, the fundamental, and the
/// first six harmonics; SINAD folds the harmonics back into the
/// denominator; SFDR is fundamental vs the strongest remaining spur.
/// Throws std::runtime_error when no dominant tone is present.
SingleToneMetrics single_tone_metrics(const DigitizedRecord& rec, const AcsConfig& cfg);

struct Ip3Result {
  double ip3_dbfs = 0.0;
  double tone_dbfs = 0.0;
  double im3_dbfs = 0.0;
  bool noise_limited = false;  // IM3 products were below the noise floor
};

/// Two-tone third-order intercept: IP3 = P_tone + (P_tone - P_IM3)/2 with
/// IM3 read at 2 f1 - f2 and 2 f2 - f1 (the worse of the two).
Ip3Result two_tone_ip3(const DigitizedRecord& rec, double f1, double f2,
                       const AcsConfig& cfg);

/// Minimum detectable signal: lower the stimulus from full scale in
/// step_db steps until the tone drops below 3 dB over the per-bin noise
/// floor; returns the last detectable level in dBFS.
/// generator(level_dbfs) must produce a record with the tone at that level.
double mds_sweep(const std::function<DigitizedRecord(double)>& generator,
                 const AcsConfig& cfg, double step_db, double floor_db = -120.0);

struct RmseResult {
  double rmse_percent = 0.0;  // of max |reference|
  int lag_samples = 0;        // alignment applied to the test record
};

/// Normalized rms error between a reference waveform and a digitized
/// capture of it, with integer-lag cross-correlation alignment.
RmseResult waveform_rmse(const Waveform& reference, const DigitizedRecord& test,
                         double lsb);

}  // namespace mmodsim
