#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mmodsim {

/// Uniformly sampled voltage trace. t0 is the absolute time of samples[0].
struct Waveform {
  double sample_rate = 0.0;  // Hz
  double t0 = 0.0;           // s
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  double dt() const { return 1.0 / sample_rate; }
  double time_at(std::size_t i) const { return t0 + static_cast<double>(i) / sample_rate; }
  double end_time() const { return time_at(samples.size()); }

  // linear interpolation; zero outside the sampled span
  double value_at(double t) const {
    const double x = (t - t0) * sample_rate;
    if (x < 0.0) return 0.0;
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= samples.size()) {
      return (i < samples.size() && x == static_cast<double>(i)) ? samples[i] : 0.0;
    }
    const double f = x - static_cast<double>(i);
    return samples[i] * (1.0 - f) + samples[i + 1] * f;
  }

  double peak_abs() const {
    double p = 0.0;
    for (double v : samples) p = std::max(p, std::fabs(v));
    return p;
  }

  double rms() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double v : samples) acc += v * v;
    return std::sqrt(acc / static_cast<double>(samples.size()));
  }
};

}  // namespace mmodsim
