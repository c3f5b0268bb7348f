#pragma once

#include <array>
#include <limits>
#include <optional>
#include <vector>

#include "mmodsim/acquisition.hpp"
#include "mmodsim/geometry.hpp"

namespace mmodsim {

/// Arrival-time detector settings. The detector integrates signal energy,
/// subtracts the mean noise rate estimated from the leading noise window,
/// and marks arrival where the corrected integral first reaches
/// threshold_fraction of its maximum.
struct ArrivalParams {
  double threshold_fraction = 0.15;    // T_E
  double noise_window_fraction = 0.10;
  bool interpolate = true;             // interpolate the crossing between samples
  double min_detectable_factor = 6.0;  // E_max gate vs the pure-noise bound
};

/// Energy bookkeeping for one record (all series share the record's time base).
struct EnergyTrace {
  std::vector<double> e;      // instantaneous energy v^2
  std::vector<double> e_sum;  // running integral of e
  std::vector<double> corrected;  // e_sum with the noise rate removed
  double noise_rate = 0.0;    // mean noise energy per unit time
  double noise_window_s = 0.0;
  double e_max = 0.0;         // max of corrected
  double dt = 0.0;
  double t0 = 0.0;
};

EnergyTrace compute_energy_trace(const Waveform& w, const ArrivalParams& params);

struct ArrivalResult {
  bool detected = false;
  double time = std::numeric_limits<double>::quiet_NaN();  // s, absolute
  double e_max = 0.0;
};

/// Arrival time of the acoustic transient in one digitized channel.
/// lsb converts counts to volts. Returns detected=false for pure noise.
ArrivalResult energy_arrival_time(const DigitizedRecord& rec, double lsb,
                                  const ArrivalParams& params);

struct LayerHit {
  int layer = 0;
  Vec2 position{};
  double hit_time = 0.0;  // s, emission epoch on this layer
  std::array<double, kSensorsPerLayer> arrivals{};  // NaN where undetected
  double residual = 0.0;  // m, rms range inconsistency over used sensors
  bool extrapolated = false;  // solution landed outside the active area
};

/// Planar multilateration over up to four sensors in a rectangular
/// arrangement. At least three finite arrival times are required.
/// Closed form: with reference sensor r and range differences
/// r_i = c (tau_i - tau_r), expanding d_i^2 - d_r^2 gives linear
/// equations 2 (S_i - S_r) . P + 2 r_i d_r = |S_i|^2 - |S_r|^2 - r_i^2
/// in (x, y, d_r). Two of them parameterize P by d_r; a third equation
/// (or, with only three sensors, the circle constraint |P - S_r| = d_r,
/// picking the root inside the active area) closes the system. One
/// Gauss-Newton step over all finite sensors then refines (x, y, t0).
/// Throws std::runtime_error for degenerate (collinear) geometry.
LayerHit multilaterate(const std::array<double, kSensorsPerLayer>& arrivals,
                       const std::array<Vec2, kSensorsPerLayer>& sensors,
                       double wave_speed, const SensorGeometry& geom, int layer = 0);

struct ImpactSolution {
  double path_length = 0.0;  // m
  double theta_x_deg = 0.0;
  double theta_y_deg = 0.0;
  double speed = 0.0;        // m/s
  double size_estimate = 0.0;  // m, filled from the grid measurement
  LayerHit top;
  LayerHit bottom;
  /// total off-normal angle, atan(sqrt(tan^2 x + tan^2 y))
  double aoa_total_deg() const;
};

/// Dual-layer geometry solve from the two per-layer hits.
/// Throws std::domain_error when bottom.hit_time <= top.hit_time.
ImpactSolution solve_impact(const LayerHit& top, const LayerHit& bottom,
                            double layer_separation_h);

struct SizeEstimate {
  bool below_threshold = false;  // no recordable resistance change
  int breaks = 0;
  double diameter = 0.0;      // m, breaks * pitch
  double diameter_min = 0.0;  // m, floored at the 50 um recording limit
  double diameter_max = 0.0;  // m
};

/// Break count and size from a grid measurement, inverting the parallel
/// resistance model. Thermistor channels supply the temperature
/// compensation.
SizeEstimate estimate_size(const GridMeasurement& gm, const GridLayout& layout,
                           const RgsConfig& cfg);

struct RegressionStats {
  double slope = 0.0;      // log10-log10 domain
  double intercept = 0.0;
  double r_squared = 0.0;
  double f_statistic = 0.0;
  double p_value = 1.0;
  int n = 0;
};

/// Ordinary least squares on (log10 x, log10 y) with the F test of the
/// slope, p from the F(1, n-2) distribution. All inputs must be positive
/// and at least three points are required.
RegressionStats regress_loglinear(const std::vector<double>& x,
                                  const std::vector<double>& y);

namespace detail {
/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double incomplete_beta(double a, double b, double x);
}  // namespace detail

}  // namespace mmodsim
