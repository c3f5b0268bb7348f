// Independent reference implementations used only by the tests. These
// deliberately take the slow route (numerical sampling, exhaustive grid
// search, direct normal equations) so they share no code path with the
// library.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mmodsim/geometry.hpp"

namespace oracle {

// Disk-strip intersection by sampling the hole's y extent: a trace is
// severed when the disk covers at least half the trace width at some y
// inside the quadrant, and the hole is at least the recordable minimum.
inline mmodsim::BreakState traces_intersected(const mmodsim::GridLayout& layout,
                                              mmodsim::Vec2 center, double diameter) {
  mmodsim::BreakState out;
  if (diameter <= 0.0) return out;
  const double r = 0.5 * diameter;
  const double side = layout.trace_length;
  const double pitch = layout.pitch();
  const double margin = layout.edge_margin();
  const bool recordable = diameter >= layout.min_recordable_diameter;

  const struct {
    double x0, y_lo, y_hi;
  } quads[4] = {{0.0, 0.0, side}, {-side, 0.0, side}, {-side, -side, 0.0}, {0.0, -side, 0.0}};

  for (int q = 0; q < 4; ++q) {
    for (int i = 0; i < layout.traces_per_quadrant; ++i) {
      const double cx = quads[q].x0 + margin + (i + 0.5) * pitch;
      const double x1 = cx - 0.5 * layout.trace_width;
      const double x2 = cx + 0.5 * layout.trace_width;
      // sample the disk across its y extent clipped to the quadrant
      const double y_lo = std::max(center.y - r, quads[q].y_lo);
      const double y_hi = std::min(center.y + r, quads[q].y_hi);
      if (y_lo > y_hi) continue;
      double max_cover = 0.0;
      const int steps = 2000;
      for (int k = 0; k <= steps; ++k) {
        const double y = y_lo + (y_hi - y_lo) * k / steps;
        const double dy = y - center.y;
        const double half = std::sqrt(std::max(0.0, r * r - dy * dy));
        const double cover = std::min(x2, center.x + half) - std::max(x1, center.x - half);
        max_cover = std::max(max_cover, cover);
      }
      if (max_cover <= 0.0) continue;
      if (recordable && max_cover >= 0.5 * layout.trace_width * (1.0 - 1e-9)) {
        out.broken[q][i % 2] += 1;
      } else {
        out.partial_breaks += 1;
      }
    }
  }
  return out;
}

// Brute-force planar source location: minimize the squared range-difference
// error on a coarse 5 mm grid over the whole active area, then on a 0.5 mm
// grid around the coarse minimum.
inline mmodsim::Vec2 grid_search_multilaterate(
    const std::array<double, 4>& arrivals, const std::array<mmodsim::Vec2, 4>& sensors,
    double wave_speed, double half_extent) {
  auto cost = [&](double x, double y) {
    // range differences against sensor 0
    const double d0 = std::hypot(x - sensors[0].x, y - sensors[0].y);
    double acc = 0.0;
    for (int i = 1; i < 4; ++i) {
      const double di = std::hypot(x - sensors[i].x, y - sensors[i].y);
      const double predicted = di - d0;
      const double measured = wave_speed * (arrivals[i] - arrivals[0]);
      acc += (predicted - measured) * (predicted - measured);
    }
    return acc;
  };

  double best_x = 0.0, best_y = 0.0;
  double best = std::numeric_limits<double>::infinity();
  const double coarse = 5e-3;
  for (double x = -half_extent; x <= half_extent; x += coarse)
    for (double y = -half_extent; y <= half_extent; y += coarse) {
      const double c = cost(x, y);
      if (c < best) {
        best = c;
        best_x = x;
        best_y = y;
      }
    }
  const double fine = 0.5e-3;
  const double cx = best_x, cy = best_y;
  for (double x = cx - 1.5 * coarse; x <= cx + 1.5 * coarse; x += fine)
    for (double y = cy - 1.5 * coarse; y <= cy + 1.5 * coarse; y += fine) {
      const double c = cost(x, y);
      if (c < best) {
        best = c;
        best_x = x;
        best_y = y;
      }
    }
  return {best_x, best_y};
}

// OLS through the explicit normal equations on (log10 x, log10 y).
struct OlsFit {
  double slope, intercept, r_squared;
};

inline OlsFit ols_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log10(x[i]), ly = std::log10(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  OlsFit f{};
  const double det = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  double ss_res = 0, ss_tot = 0;
  const double ym = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log10(x[i]), ly = std::log10(y[i]);
    const double fit = f.intercept + f.slope * lx;
    ss_res += (ly - fit) * (ly - fit);
    ss_tot += (ly - ym) * (ly - ym);
  }
  f.r_squared = 1.0 - ss_res / ss_tot;
  return f;
}

}  // namespace oracle
