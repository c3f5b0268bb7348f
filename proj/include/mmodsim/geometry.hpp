#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace mmodsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

inline constexpr int kLayers = 2;
inline constexpr int kSensorsPerLayer = 4;
inline constexpr int kQuadrants = 4;
inline constexpr int kTopLayer = 0;     // resistive-grid sheet, hit first
inline constexpr int kBottomLayer = 1;  // kapton-only sheet

/// Physical sensor layout. The film plane is centered on the origin;
/// layer 0 is the outer (resistive-grid) sheet, layer 1 the inner one.
struct SensorGeometry {
  double layer_separation_h = 0.15;  // m
  double active_width = 0.50;        // m
  double active_height = 0.50;       // m
  std::array<std::array<Vec2, kSensorsPerLayer>, kLayers> sensor_positions{};
  std::array<double, kLayers> wave_speed{2360.0, 1900.0};  // m/s
  std::array<Vec2, kLayers> piezo_position{};

  static SensorGeometry with_defaults();

  bool contains(Vec2 p) const {
    return std::fabs(p.x) <= 0.5 * active_width && std::fabs(p.y) <= 0.5 * active_height;
  }

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

/// Resistive-trace grid: four quadrants of parallel traces, each quadrant
/// split into interleaved subgrids A and B (A,B,A,B,... by trace index).
/// Traces run parallel to the y axis; quadrant 0 is (+x,+y) and the rest
/// follow counterclockwise.
struct GridLayout {
  int traces_per_quadrant = 1640;
  int traces_per_subgrid = 820;
  double trace_width = 75e-6;   // m
  double trace_gap = 75e-6;     // m
  double trace_length = 0.25;   // m, also the quadrant side
  double trace_resistance = 330e3;   // ohm per trace
  double sheet_resistivity = 100.0;  // ohm per square
  double tcr = 20e-6;                // 1/degC
  double min_recordable_diameter = 50e-6;  // smaller holes never sever a trace
  // 0 = parallel-resistor model (about 0.49 ohm per break at defaults);
  // set to e.g. 0.7 to pin the per-break step to an empirical calibration
  double empirical_break_ohms = 0.0;

  double pitch() const { return trace_width + trace_gap; }
  double nominal_subgrid_resistance() const {
    return trace_resistance / static_cast<double>(traces_per_subgrid);
  }
  /// x position of the margin between the quadrant edge and the first trace
  double edge_margin() const {
    return 0.5 * (trace_length - static_cast<double>(traces_per_quadrant) * pitch());
  }

  void validate() const;
};

enum class Subgrid : uint8_t { A = 0, B = 1 };

/// Count of fully severed traces per quadrant and subgrid, plus grazing
/// hits that only nick a trace (not recorded as breaks).
struct BreakState {
  std::array<std::array<int, 2>, kQuadrants> broken{};  // [quadrant][subgrid]
  int partial_breaks = 0;

  int total_broken() const {
    int n = 0;
    for (const auto& q : broken) n += q[0] + q[1];
    return n;
  }
  int quadrant_broken(int q) const { return broken[q][0] + broken[q][1]; }
};

/// Resistance of one subgrid with n_broken severed traces at temp_delta
/// degrees from nominal. Empty optional means open circuit (all traces cut).
std::optional<double> subgrid_resistance(const GridLayout& layout, int n_broken,
                                         double temp_delta_c);

/// Traces severed by a circular hole. A trace counts as broken when the
/// hole covers at least half the trace width at some point along it and
/// the hole itself is at least min_recordable_diameter across; lesser
/// overlaps count as partial breaks.
BreakState traces_intersected(const GridLayout& layout, Vec2 hole_center,
                              double hole_diameter);

}  // namespace mmodsim
