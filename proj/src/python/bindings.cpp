#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mmodsim/analysis.hpp"
#include "mmodsim/campaign.hpp"
#include "mmodsim/config.hpp"
#include "mmodsim/controller.hpp"
#include "mmodsim/metrics.hpp"
#include "mmodsim/rng.hpp"

namespace py = pybind11;
using namespace mmodsim;

namespace {

SimConfig config_from(const std::string& path) { return SimConfig::load(path); }

py::dict hit_dict(const LayerHit& h) {
  py::dict d;
  d["layer"] = h.layer;
  d["x"] = h.position.x;
  d["y"] = h.position.y;
  d["hit_time"] = h.hit_time;
  d["residual"] = h.residual;
  d["extrapolated"] = h.extrapolated;
  return d;
}

py::dict row_dict(const ShotRow& r) {
  py::dict d;
  d["shot_id"] = r.shot_id;
  d["status"] = to_string(r.status);
  d["material"] = r.material;
  d["diameter_m"] = r.diameter;
  d["speed_true_mps"] = r.speed_true;
  d["speed_meas_mps"] = r.speed_meas;
  d["aoa_true_deg"] = r.aoa_true_deg;
  d["aoa_meas_deg"] = r.aoa_meas_deg;
  d["pos_err_top_m"] = r.pos_err_top;
  d["pos_err_bottom_m"] = r.pos_err_bottom;
  d["speed_err_mps"] = r.speed_err;
  d["aoa_err_deg"] = r.aoa_err_deg;
  d["size_meas_m"] = r.size_meas;
  d["breaks"] = r.breaks;
  d["snr_meas_db"] = r.snr_meas_db;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "dual-layer debris impact sensor simulator core";

  m.def("default_config_json", []() { return SimConfig().to_json(); });

  m.def(
      "subgrid_resistance",
      [](int n_broken, double temp_delta_c) -> py::object {
        GridLayout layout;
        const auto r = subgrid_resistance(layout, n_broken, temp_delta_c);
        if (!r) return py::none();
        return py::float_(*r);
      },
      py::arg("n_broken"), py::arg("temp_delta_c") = 0.0,
      "Subgrid resistance in ohm for the default layout; None = open circuit");

  m.def(
      "traces_intersected",
      [](double x, double y, double diameter) {
        GridLayout layout;
        const BreakState b = traces_intersected(layout, {x, y}, diameter);
        py::dict d;
        py::list quads;
        for (int q = 0; q < kQuadrants; ++q) {
          py::dict qq;
          qq["a"] = b.broken[q][0];
          qq["b"] = b.broken[q][1];
          quads.append(qq);
        }
        d["quadrants"] = quads;
        d["total"] = b.total_broken();
        d["partial"] = b.partial_breaks;
        return d;
      },
      py::arg("x"), py::arg("y"), py::arg("diameter"));

  m.def(
      "multilaterate",
      [](const std::vector<double>& arrivals, const std::vector<std::pair<double, double>>& sensors,
         double wave_speed) {
        if (arrivals.size() != 4 || sensors.size() != 4)
          throw std::invalid_argument("need 4 arrivals and 4 sensor positions");
        std::array<double, 4> arr;
        std::array<Vec2, 4> pos;
        for (int i = 0; i < 4; ++i) {
          arr[i] = arrivals[static_cast<std::size_t>(i)];
          pos[i] = {sensors[static_cast<std::size_t>(i)].first,
                    sensors[static_cast<std::size_t>(i)].second};
        }
        SensorGeometry geom = SensorGeometry::with_defaults();
        return hit_dict(multilaterate(arr, pos, wave_speed, geom));
      },
      py::arg("arrivals"), py::arg("sensors"), py::arg("wave_speed"),
      "Closed-form planar multilateration; NaN arrivals are skipped");

  m.def(
      "solve_impact",
      [](py::dict top, py::dict bottom, double h) {
        LayerHit t, b;
        t.position = {top["x"].cast<double>(), top["y"].cast<double>()};
        t.hit_time = top["hit_time"].cast<double>();
        b.position = {bottom["x"].cast<double>(), bottom["y"].cast<double>()};
        b.hit_time = bottom["hit_time"].cast<double>();
        const ImpactSolution s = solve_impact(t, b, h);
        py::dict d;
        d["path_length_m"] = s.path_length;
        d["theta_x_deg"] = s.theta_x_deg;
        d["theta_y_deg"] = s.theta_y_deg;
        d["aoa_total_deg"] = s.aoa_total_deg();
        d["speed_mps"] = s.speed;
        return d;
      },
      py::arg("top"), py::arg("bottom"), py::arg("h"));

  m.def(
      "energy_arrival_time",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> samples,
         double sample_rate, double t0, double threshold_fraction) -> py::object {
        DigitizedRecord rec;
        rec.sample_period = 1.0 / sample_rate;
        rec.t0 = t0;
        const auto buf = samples.unchecked<1>();
        rec.samples.resize(static_cast<std::size_t>(buf.shape(0)));
        // the detector is scale-invariant; map volts onto counts directly
        for (py::ssize_t i = 0; i < buf.shape(0); ++i) {
          const double v = buf(i) * 1000.0;
          rec.samples[static_cast<std::size_t>(i)] =
              static_cast<int16_t>(std::clamp(v, -32768.0, 32767.0));
        }
        ArrivalParams params;
        params.threshold_fraction = threshold_fraction;
        const ArrivalResult r = energy_arrival_time(rec, 1e-3, params);
        if (!r.detected) return py::none();
        return py::float_(r.time);
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("t0") = 0.0,
      py::arg("threshold_fraction") = 0.15,
      "Arrival time of a transient in a voltage trace, or None");

  m.def(
      "regress_loglinear",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const RegressionStats st = regress_loglinear(x, y);
        py::dict d;
        d["slope"] = st.slope;
        d["intercept"] = st.intercept;
        d["r_squared"] = st.r_squared;
        d["f_statistic"] = st.f_statistic;
        d["p_value"] = st.p_value;
        d["n"] = st.n;
        return d;
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "single_tone_metrics",
      [](py::array_t<int16_t, py::array::c_style | py::array::forcecast> counts,
         double sample_rate) {
        AcsConfig acs;
        DigitizedRecord rec;
        rec.sample_period = 1.0 / sample_rate;
        const auto buf = counts.unchecked<1>();
        rec.samples.assign(buf.data(0), buf.data(0) + buf.shape(0));
        const SingleToneMetrics s = single_tone_metrics(rec, acs);
        py::dict d;
        d["snrfs_db"] = s.snrfs_db;
        d["sinad_db"] = s.sinad_db;
        d["enob_bits"] = s.enob_bits;
        d["sfdr_db"] = s.sfdr_db;
        d["fundamental_hz"] = s.fundamental_freq;
        return d;
      },
      py::arg("counts"), py::arg("sample_rate") = 500e3);

  m.def("enob_from_sinad", &enob_from_sinad, py::arg("sinad_db"));

  m.def(
      "run_campaign",
      [](const std::string& scenario_path, const std::string& config_path,
         uint64_t master_seed, int jobs) {
        const SimConfig cfg = config_from(config_path);
        const auto scenarios = load_scenarios(scenario_path);
        const CampaignReport report = run_campaign(scenarios, cfg, master_seed, jobs);
        py::list rows;
        for (const auto& r : report.rows) rows.append(row_dict(r));
        py::dict agg;
        agg["rows"] = report.aggregates.rows;
        agg["ok"] = report.aggregates.ok;
        agg["mean_pos_err_top_m"] = report.aggregates.mean_pos_err_top;
        agg["mean_pos_err_bottom_m"] = report.aggregates.mean_pos_err_bottom;
        agg["mean_aoa_err_deg"] = report.aggregates.mean_aoa_err;
        agg["mean_speed_err_mps"] = report.aggregates.mean_speed_err;
        py::dict d;
        d["rows"] = rows;
        d["aggregates"] = agg;
        d["config_digest"] = report.config_digest;
        return d;
      },
      py::arg("scenario_path"), py::arg("config_path") = std::string(),
      py::arg("master_seed") = 1, py::arg("jobs") = 1);

  m.def("crc32", [](py::bytes data) {
    const std::string s = data;
    return crc32(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  });

  m.def("mix_seed", &mix_seed, py::arg("master"), py::arg("stream"));
}
