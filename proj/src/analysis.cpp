#include "mmodsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmodsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kRadToDeg = 180.0 / kPi;
}  // namespace

EnergyTrace compute_energy_trace(const Waveform& w, const ArrivalParams& params) {
  EnergyTrace tr;
  const std::size_t n = w.samples.size();
  tr.dt = w.dt();
  tr.t0 = w.t0;
  tr.e.resize(n);
  for (std::size_t i = 0; i < n; ++i) tr.e[i] = w.samples[i] * w.samples[i];

  // e_sum[k] = integral over [t0, t0 + k dt): sample j covers [t_j, t_j+1)
  tr.e_sum.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tr.e_sum[i] = acc;  // integral up to the left edge of sample i
    acc += tr.e[i] * tr.dt;
  }

  const auto m = static_cast<std::size_t>(params.noise_window_fraction * n);
  tr.noise_window_s = static_cast<double>(m) * tr.dt;
  double noise_acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) noise_acc += tr.e[i] * tr.dt;
  tr.noise_rate = (m > 0) ? noise_acc / tr.noise_window_s : 0.0;

  tr.corrected.resize(n);
  tr.e_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    tr.corrected[i] = tr.e_sum[i] - tr.noise_rate * (static_cast<double>(i) * tr.dt);
    tr.e_max = std::max(tr.e_max, tr.corrected[i]);
  }
  return tr;
}

ArrivalResult energy_arrival_time(const DigitizedRecord& rec, double lsb,
                                  const ArrivalParams& params) {
  ArrivalResult out;
  const Waveform w = rec.to_waveform(lsb);
  const std::size_t n = w.samples.size();
  const auto m = static_cast<std::size_t>(params.noise_window_fraction * n);
  if (n == 0 || m == 0)
    throw std::invalid_argument("record too short for a noise window");

  const EnergyTrace tr = compute_energy_trace(w, params);
  out.e_max = tr.e_max;
  if (tr.e_max <= 0.0) return out;  // no signal

  // Gate against a pure-noise record: the corrected integral of white
  // noise wanders by about sigma^2 sqrt(2 T dt) plus the drift induced by
  // the noise-rate estimation error, sigma^2 T sqrt(2/m).
  const double total_t = static_cast<double>(n) * tr.dt;
  const double walk = tr.noise_rate * std::sqrt(2.0 * total_t * tr.dt);
  const double drift = tr.noise_rate * total_t * std::sqrt(2.0 / static_cast<double>(m));
  if (tr.e_max < params.min_detectable_factor * (walk + drift)) return out;

  const double target = params.threshold_fraction * tr.e_max;
  for (std::size_t i = 0; i < n; ++i) {
    if (tr.corrected[i] >= target) {
      double t = static_cast<double>(i);
      if (params.interpolate && i > 0) {
        const double lo = tr.corrected[i - 1];
        const double hi = tr.corrected[i];
        if (hi > lo) t = static_cast<double>(i - 1) + (target - lo) / (hi - lo);
      }
      out.detected = true;
      out.time = tr.t0 + t * tr.dt;
      return out;
    }
  }
  return out;
}

namespace {

struct LinearParam {
  // P(t) = p0 - q * t for the two base equations
  Vec2 p0, q;
};

// Rows of 2 (S_i - S_r) . P + 2 r_i t = k_i
struct DiffEq {
  Vec2 a;     // 2 (S_i - S_r)
  double r2;  // 2 r_i
  double k;
};

DiffEq make_eq(Vec2 s_i, Vec2 s_r, double r_i) {
  DiffEq eq;
  eq.a = (s_i - s_r) * 2.0;
  eq.r2 = 2.0 * r_i;
  eq.k = s_i.dot(s_i) - s_r.dot(s_r) - r_i * r_i;
  return eq;
}

std::optional<LinearParam> parameterize(const DiffEq& e1, const DiffEq& e2, double scale) {
  const double det = e1.a.x * e2.a.y - e1.a.y * e2.a.x;
  if (std::fabs(det) < 1e-12 * scale * scale) return std::nullopt;
  LinearParam lp;
  lp.p0 = {(e1.k * e2.a.y - e2.k * e1.a.y) / det, (e1.a.x * e2.k - e2.a.x * e1.k) / det};
  lp.q = {(e1.r2 * e2.a.y - e2.r2 * e1.a.y) / det, (e1.a.x * e2.r2 - e2.a.x * e1.r2) / det};
  return lp;
}

}  // namespace

LayerHit multilaterate(const std::array<double, kSensorsPerLayer>& arrivals,
                       const std::array<Vec2, kSensorsPerLayer>& sensors,
                       double wave_speed, const SensorGeometry& geom, int layer) {
  LayerHit hit;
  hit.layer = layer;
  hit.arrivals = arrivals;

  std::vector<int> usable;
  for (int i = 0; i < kSensorsPerLayer; ++i)
    if (std::isfinite(arrivals[i])) usable.push_back(i);
  if (usable.size() < 3)
    throw std::runtime_error("multilateration needs at least 3 arrival times");

  // reference: earliest usable arrival
  int ref = usable[0];
  for (int i : usable)
    if (arrivals[i] < arrivals[ref]) ref = i;

  std::vector<DiffEq> eqs;
  double scale = 0.0;
  for (int i : usable) {
    if (i == ref) continue;
    eqs.push_back(make_eq(sensors[i], sensors[ref], wave_speed * (arrivals[i] - arrivals[ref])));
    scale = std::max(scale, (sensors[i] - sensors[ref]).norm());
  }

  // pick the best-conditioned pair of equations to parameterize P by d_ref
  std::optional<LinearParam> lp;
  int third = -1;
  double best_det = -1.0;
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    for (std::size_t j = i + 1; j < eqs.size(); ++j) {
      const double det =
          std::fabs(eqs[i].a.x * eqs[j].a.y - eqs[i].a.y * eqs[j].a.x);
      if (det > best_det) {
        auto cand = parameterize(eqs[i], eqs[j], scale);
        if (cand) {
          best_det = det;
          lp = cand;
          third = (eqs.size() == 3) ? static_cast<int>(3 - i - j) : -1;
        }
      }
    }
  }
  if (!lp) throw std::runtime_error("degenerate sensor geometry (collinear)");

  // close the system for t = d_ref
  double t = -1.0;
  bool solved = false;
  if (third >= 0) {
    const DiffEq& e = eqs[static_cast<std::size_t>(third)];
    const double a = e.r2 - e.a.dot(lp->q);
    const double b = e.k - e.a.dot(lp->p0);
    if (std::fabs(a) > 1e-9 * scale) {
      t = b / a;
      solved = true;
    }
  }
  if (!solved) {
    // circle constraint |P(t) - S_ref| = t  (three sensors, or the third
    // equation was degenerate, e.g. all arrivals equal)
    const Vec2 w = lp->p0 - sensors[ref];
    const double qa = lp->q.dot(lp->q) - 1.0;
    const double qb = -2.0 * w.dot(lp->q);
    const double qc = w.dot(w);
    double roots[2];
    int n_roots = 0;
    if (std::fabs(qa) < 1e-12) {
      if (std::fabs(qb) > 1e-300) roots[n_roots++] = -qc / qb;
    } else {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        roots[n_roots++] = (-qb + sq) / (2.0 * qa);
        roots[n_roots++] = (-qb - sq) / (2.0 * qa);
      }
    }
    // keep non-negative ranges; tie-break on the solution inside the
    // active area, then on the smaller range
    double best_cost = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_roots; ++i) {
      const double cand = roots[i];
      if (cand < 0.0) continue;
      const Vec2 p = lp->p0 - lp->q * cand;
      const double cost = (geom.contains(p) ? 0.0 : 1e6) + cand;
      if (cost < best_cost) {
        best_cost = cost;
        t = cand;
        solved = true;
      }
    }
    if (!solved) throw std::runtime_error("multilateration has no real solution");
  }
  if (t < 0.0) t = 0.0;

  Vec2 p = lp->p0 - lp->q * t;

  // emission epoch from the ranges
  auto epoch = [&](Vec2 pos) {
    double acc = 0.0;
    for (int i : usable) acc += arrivals[i] - distance(pos, sensors[i]) / wave_speed;
    return acc / static_cast<double>(usable.size());
  };
  double t0 = epoch(p);

  // one Gauss-Newton step on (x, y, t0) over all usable sensors
  {
    double jtj[3][3] = {};
    double jtr[3] = {};
    for (int i : usable) {
      const double d = distance(p, sensors[i]);
      if (d < 1e-9) continue;
      const double res = wave_speed * (arrivals[i] - t0) - d;
      const double jx = -(p.x - sensors[i].x) / d;
      const double jy = -(p.y - sensors[i].y) / d;
      const double jt = -wave_speed;
      const double j[3] = {jx, jy, jt};
      for (int r = 0; r < 3; ++r) {
        jtr[r] += j[r] * res;
        for (int c = 0; c < 3; ++c) jtj[r][c] += j[r] * j[c];
      }
    }
    // solve 3x3 via Cramer
    const double det = jtj[0][0] * (jtj[1][1] * jtj[2][2] - jtj[1][2] * jtj[2][1]) -
                       jtj[0][1] * (jtj[1][0] * jtj[2][2] - jtj[1][2] * jtj[2][0]) +
                       jtj[0][2] * (jtj[1][0] * jtj[2][1] - jtj[1][1] * jtj[2][0]);
    if (std::fabs(det) > 1e-18) {
      auto solve_col = [&](int col) {
        double m[3][3];
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) m[r][c] = (c == col) ? jtr[r] : jtj[r][c];
        return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
               det;
      };
      const double dx = solve_col(0), dy = solve_col(1), dt0 = solve_col(2);
      // a single damped step; reject wild corrections from poor geometry
      if (std::isfinite(dx) && std::isfinite(dy) && std::hypot(dx, dy) < 0.5 * scale) {
        p.x += dx;
        p.y += dy;
        t0 += dt0;
      }
    }
  }

  hit.position = p;
  hit.hit_time = t0;
  hit.extrapolated = !geom.contains(p);
  double acc = 0.0;
  for (int i : usable) {
    const double res = wave_speed * (arrivals[i] - t0) - distance(p, sensors[i]);
    acc += res * res;
  }
  hit.residual = std::sqrt(acc / static_cast<double>(usable.size()));
  return hit;
}

double ImpactSolution::aoa_total_deg() const {
  const double tx = std::tan(theta_x_deg / kRadToDeg);
  const double ty = std::tan(theta_y_deg / kRadToDeg);
  return std::atan(std::sqrt(tx * tx + ty * ty)) * kRadToDeg;
}

ImpactSolution solve_impact(const LayerHit& top, const LayerHit& bottom,
                            double layer_separation_h) {
  if (!(bottom.hit_time > top.hit_time))
    throw std::domain_error("bottom hit must come after top hit");
  ImpactSolution sol;
  sol.top = top;
  sol.bottom = bottom;
  const double dx = bottom.position.x - top.position.x;
  const double dy = bottom.position.y - top.position.y;
  const double h = layer_separation_h;
  sol.path_length = std::sqrt(dx * dx + dy * dy + h * h);
  sol.theta_x_deg = std::atan(dx / h) * kRadToDeg;
  sol.theta_y_deg = std::atan(dy / h) * kRadToDeg;
  sol.speed = sol.path_length / (bottom.hit_time - top.hit_time);
  return sol;
}

SizeEstimate estimate_size(const GridMeasurement& gm, const GridLayout& layout,
                           const RgsConfig& cfg) {
  SizeEstimate est;
  // temperature compensation from the thermistor channels of the top sheet
  double t_acc = 0.0;
  for (int i = 0; i < 4; ++i) t_acc += thermistor_counts_to_c(gm.thermistor_counts[i], cfg);
  const double temp_delta = t_acc / 4.0 - 25.0;
  const double r_intact = layout.trace_resistance * (1.0 + layout.tcr * temp_delta);
  const double n_traces = static_cast<double>(layout.traces_per_subgrid);

  int total = 0;
  for (const auto& q : gm.quadrants) {
    if (q.open_circuit) {
      total += 2 * layout.traces_per_subgrid;
      continue;
    }
    for (double r : {q.r_a, q.r_b}) {
      if (r <= 0.0) continue;
      double n_est;
      if (layout.empirical_break_ohms > 0.0) {
        const double r0 = layout.nominal_subgrid_resistance() * (1.0 + layout.tcr * temp_delta);
        n_est = (r - r0) / (layout.empirical_break_ohms * (1.0 + layout.tcr * temp_delta));
      } else {
        n_est = n_traces - r_intact / r;
      }
      total += static_cast<int>(std::lround(std::max(0.0, n_est)));
    }
  }
  est.breaks = total;
  if (total == 0) {
    est.below_threshold = true;
    return est;
  }
  const double pitch = layout.pitch();
  est.diameter = total * pitch;
  est.diameter_min = std::max(layout.min_recordable_diameter, (total - 1) * pitch);
  est.diameter_max = (total + 1) * pitch;
  return est;
}

namespace detail {

namespace {
double betacf(double a, double b, double x) {
  // Lentz's continued fraction for the incomplete beta function
  constexpr int kMaxIter = 200;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}
}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

RegressionStats regress_loglinear(const std::vector<double>& x,
                                  const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("size mismatch");
  const auto n = x.size();
  if (n < 3) throw std::invalid_argument("need at least 3 points");
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0)
      throw std::domain_error("log regression needs positive values");
    lx[i] = std::log10(x[i]);
    ly[i] = std::log10(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw std::domain_error("zero variance in x: slope undefined");

  RegressionStats st;
  st.n = static_cast<int>(n);
  st.slope = sxy / sxx;
  st.intercept = my - st.slope * mx;
  if (syy <= 0.0) {
    // constant y: a flat fit explains everything there is to explain
    st.r_squared = 0.0;
    st.f_statistic = 0.0;
    st.p_value = 1.0;
    return st;
  }
  const double ss_res = syy - st.slope * sxy;
  st.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (st.r_squared >= 1.0) {
    st.f_statistic = std::numeric_limits<double>::infinity();
    st.p_value = 0.0;
    return st;
  }
  st.f_statistic = df * st.r_squared / (1.0 - st.r_squared);
  st.p_value = detail::incomplete_beta(df / 2.0, 0.5, df / (df + st.f_statistic));
  return st;
}

}  // namespace mmodsim
