#include "mmodsim/geometry.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mmodsim {

SensorGeometry SensorGeometry::with_defaults() {
  SensorGeometry g;
  const double inset = 0.04;  // m from each corner
  const double cx = 0.5 * g.active_width - inset;
  const double cy = 0.5 * g.active_height - inset;
  for (int layer = 0; layer < kLayers; ++layer) {
    g.sensor_positions[layer] = {Vec2{-cx, -cy}, Vec2{cx, -cy}, Vec2{-cx, cy}, Vec2{cx, cy}};
    // off-center so piezo-to-sensor distances are all distinct; equal
    // distances would make the wave-speed calibration insensitive to speed
    g.piezo_position[layer] = Vec2{0.10, 0.06};
  }
  return g;
}

void SensorGeometry::validate() const {
  if (layer_separation_h <= 0.0)
    throw std::invalid_argument("layer_separation_h must be > 0");
  if (active_width <= 0.0 || active_height <= 0.0)
    throw std::invalid_argument("active area must have positive size");
  for (int layer = 0; layer < kLayers; ++layer) {
    if (wave_speed[layer] <= 0.0)
      throw std::invalid_argument("wave speed must be > 0");
    for (const Vec2& s : sensor_positions[layer]) {
      if (!contains(s))
        throw std::invalid_argument("sensor position outside active area");
    }
  }
}

void GridLayout::validate() const {
  if (traces_per_quadrant != 2 * traces_per_subgrid)
    throw std::invalid_argument("traces_per_quadrant must be 2 x traces_per_subgrid");
  if (trace_width <= 0.0 || trace_gap <= 0.0 || trace_length <= 0.0)
    throw std::invalid_argument("trace dimensions must be > 0");
  if (trace_resistance <= 0.0)
    throw std::invalid_argument("trace_resistance must be > 0");
  if (edge_margin() < 0.0)
    throw std::invalid_argument("traces do not fit in the quadrant");
  const double nominal = nominal_subgrid_resistance();
  if (nominal < 395.0 || nominal > 410.0)
    throw std::invalid_argument("nominal subgrid resistance outside [395, 410] ohm: " +
                                std::to_string(nominal));
}

std::optional<double> subgrid_resistance(const GridLayout& layout, int n_broken,
                                         double temp_delta_c) {
  if (n_broken < 0 || n_broken > layout.traces_per_subgrid)
    throw std::invalid_argument("n_broken out of range");
  if (n_broken == layout.traces_per_subgrid) return std::nullopt;  // open circuit
  const double scale = 1.0 + layout.tcr * temp_delta_c;
  if (layout.empirical_break_ohms > 0.0) {
    return (layout.nominal_subgrid_resistance() +
            layout.empirical_break_ohms * static_cast<double>(n_broken)) *
           scale;
  }
  const double intact = static_cast<double>(layout.traces_per_subgrid - n_broken);
  return layout.trace_resistance / intact * scale;
}

namespace {

struct QuadrantFrame {
  double x0;      // quadrant x range [x0, x0 + side]
  double y_lo;    // quadrant y range
  double y_hi;
};

QuadrantFrame quadrant_frame(const GridLayout& layout, int q) {
  const double side = layout.trace_length;
  switch (q) {
    case 0: return {0.0, 0.0, side};      // (+x, +y)
    case 1: return {-side, 0.0, side};    // (-x, +y)
    case 2: return {-side, -side, 0.0};   // (-x, -y)
    default: return {0.0, -side, 0.0};    // (+x, -y)
  }
}

}  // namespace

BreakState traces_intersected(const GridLayout& layout, Vec2 hole_center,
                              double hole_diameter) {
  if (hole_diameter < 0.0) throw std::invalid_argument("hole_diameter must be >= 0");
  const double side = layout.trace_length;
  if (std::fabs(hole_center.x) > side || std::fabs(hole_center.y) > side)
    throw std::out_of_range("hole center outside active area");

  BreakState state;
  if (hole_diameter == 0.0) return state;

  const double r = 0.5 * hole_diameter;
  const double pitch = layout.pitch();
  const double half_w = 0.5 * layout.trace_width;
  const double margin = layout.edge_margin();
  // boundary-inclusive half-width criterion, with an fp guard so exact
  // half-coverage counts as severed
  const double sever_overlap = half_w * (1.0 - 1e-9);
  const bool recordable = hole_diameter >= layout.min_recordable_diameter;

  for (int q = 0; q < kQuadrants; ++q) {
    const QuadrantFrame f = quadrant_frame(layout, q);
    // distance from hole center to the quadrant's y span
    double dy = 0.0;
    if (hole_center.y < f.y_lo) dy = f.y_lo - hole_center.y;
    else if (hole_center.y > f.y_hi) dy = hole_center.y - f.y_hi;
    if (dy >= r) continue;
    // widest x half-extent of the disk inside this quadrant's y span
    const double rx = std::sqrt(std::max(0.0, r * r - dy * dy));

    const double lo = hole_center.x - rx;
    const double hi = hole_center.x + rx;
    // candidate trace indices: centers at f.x0 + margin + (i + 0.5) * pitch
    const double first_center = f.x0 + margin + 0.5 * pitch;
    int i_lo = static_cast<int>(std::floor((lo - half_w - first_center) / pitch));
    int i_hi = static_cast<int>(std::ceil((hi + half_w - first_center) / pitch));
    i_lo = std::max(i_lo, 0);
    i_hi = std::min(i_hi, layout.traces_per_quadrant - 1);
    for (int i = i_lo; i <= i_hi; ++i) {
      const double cx = first_center + static_cast<double>(i) * pitch;
      const double overlap =
          std::min(hi, cx + half_w) - std::max(lo, cx - half_w);
      if (overlap <= 0.0) continue;
      if (recordable && overlap >= sever_overlap) {
        state.broken[q][i % 2] += 1;
      } else {
        state.partial_breaks += 1;
      }
    }
  }
  return state;
}

}  // namespace mmodsim
