// Campaign runner and report generator for the dual-layer impact sensor
// simulator. Subcommands: simulate, acquire, analyze, campaign, metrics,
// calibrate, report.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "mmodsim/campaign.hpp"
#include "mmodsim/config.hpp"
#include "mmodsim/controller.hpp"
#include "mmodsim/metrics.hpp"
#include "mmodsim/rng.hpp"

namespace fs = std::filesystem;
using namespace mmodsim;

namespace {

struct CommonOpts {
  std::string scenario;
  std::string config;
  std::string out = ".";
  uint64_t seed = 1;
  int jobs = 1;
};

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? "." : p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::vector<ImpactScenario> prepared_scenarios(const CommonOpts& opt) {
  auto scenarios = load_scenarios(opt.scenario);
  for (auto& s : scenarios)
    if (s.rng_seed == 0) s.rng_seed = mix_seed(opt.seed, static_cast<uint64_t>(s.shot_id));
  return scenarios;
}

nlohmann::ordered_json truth_json(const ImpactScenario& s, const PhysicalSignals& sig) {
  nlohmann::ordered_json j;
  j["shot_id"] = s.shot_id;
  j["material"] = material_name(s.material);
  j["diameter_m"] = s.diameter;
  j["speed_mps"] = s.speed;
  j["impact_time_top_s"] = sig.impact_time_top;
  j["impact_time_bottom_s"] = sig.impact_time_bottom;
  j["hit_top"] = {sig.true_hit_top.x, sig.true_hit_top.y};
  j["hit_bottom"] = {sig.true_hit_bottom.x, sig.true_hit_bottom.y};
  j["path_length_m"] = sig.path_length;
  j["noise_rms_v"] = sig.noise_rms;
  j["source_amplitude_v"] = sig.source_amplitude;
  int breaks = 0;
  for (int q = 0; q < kQuadrants; ++q) breaks += sig.break_state.quadrant_broken(q);
  j["traces_broken"] = breaks;
  j["partial_breaks"] = sig.break_state.partial_breaks;
  return j;
}

int cmd_simulate(const CommonOpts& opt, bool dump_waveforms) {
  SimConfig cfg = SimConfig::load(opt.config);
  for (const auto& s : prepared_scenarios(opt)) {
    try {
      const PhysicalSignals sig = simulate_shot(s, cfg.geometry, cfg.layout, cfg.synth);
      const auto base = fs::path(opt.out) / ("shot" + std::to_string(s.shot_id));
      write_file(base.string() + "_truth.json", truth_json(s, sig).dump(2) + "\n");
      if (dump_waveforms) {
        for (int ch = 0; ch < 8; ++ch) {
          std::ofstream f(base.string() + "_wave" + std::to_string(ch) + ".f64",
                          std::ios::binary);
          const auto& w = sig.waveforms[ch];
          f.write(reinterpret_cast<const char*>(w.samples.data()),
                  static_cast<std::streamsize>(w.samples.size() * sizeof(double)));
        }
      }
    } catch (const std::domain_error& e) {
      std::cerr << "shot " << s.shot_id << ": " << e.what() << "\n";
    }
  }
  return 0;
}

int cmd_acquire(const CommonOpts& opt) {
  SimConfig cfg = SimConfig::load(opt.config);
  for (const auto& s : prepared_scenarios(opt)) {
    try {
      const PhysicalSignals sig = simulate_shot(s, cfg.geometry, cfg.layout, cfg.synth);
      AcsConfig acs = cfg.acs;
      acs.trigger_threshold = acs.resolve_threshold(sig.noise_rms);
      std::array<Waveform, 8> filtered;
      for (int ch = 0; ch < 8; ++ch) filtered[ch] = highpass(sig.waveforms[ch], acs);
      const auto captures = trigger_capture(interleave_and_digitize(filtered, acs), acs);
      const auto base = fs::path(opt.out) / ("shot" + std::to_string(s.shot_id));
      if (captures.empty()) {
        std::cerr << "shot " << s.shot_id << ": no trigger\n";
        continue;
      }
      for (int ch = 0; ch < 8; ++ch) {
        std::ofstream f(base.string() + "_ch" + std::to_string(ch) + ".rec",
                        std::ios::binary);
        write_record(f, captures[0][ch]);
      }
      std::array<double, 8> corners;
      corners.fill(cfg.ambient_temp_c);
      const auto temps = thermistor_readout(corners, cfg.synth.thermistor_noise_c, s.rng_seed);
      const GridMeasurement gm = rgs_measure(sig.break_state, cfg.layout,
                                             cfg.ambient_temp_c - 25.0, cfg.rgs, temps,
                                             s.rng_seed, sig.impact_time_top);
      nlohmann::ordered_json j;
      for (int q = 0; q < kQuadrants; ++q) {
        j["quadrants"].push_back({{"sum_counts", gm.quadrants[q].sum_counts},
                                  {"diff_counts", gm.quadrants[q].diff_counts},
                                  {"r_a_ohm", gm.quadrants[q].r_a},
                                  {"r_b_ohm", gm.quadrants[q].r_b},
                                  {"open", gm.quadrants[q].open_circuit}});
      }
      j["thermistor_counts"] = gm.thermistor_counts;
      j["timestamp_s"] = gm.timestamp;
      write_file(base.string() + "_grid.json", j.dump(2) + "\n");
    } catch (const std::domain_error& e) {
      std::cerr << "shot " << s.shot_id << ": " << e.what() << "\n";
    }
  }
  return 0;
}

int cmd_campaign(const CommonOpts& opt, const std::vector<std::string>& formats) {
  SimConfig cfg = SimConfig::load(opt.config);
  const auto scenarios = load_scenarios(opt.scenario);
  const CampaignReport report = run_campaign(scenarios, cfg, opt.seed, opt.jobs);
  const fs::path out(opt.out);
  for (const auto& f : formats) {
    if (f == "csv") {
      write_file(out / "report.csv", report_csv(report));
    } else if (f == "json-lines") {
      write_file(out / "report.jsonl", report_jsonl(report));
    } else if (f == "plot-data") {
      const PlotData pd = report_plot_data(report);
      write_file(out / "position_errors.dat", pd.position_errors);
      write_file(out / "amplitude_vs_size.dat", pd.amplitude_vs_size);
      write_file(out / "regression_lines.dat", pd.regression_lines);
    } else {
      std::cerr << "unknown format: " << f << "\n";
      return 1;
    }
  }
  write_file(out / "summary.json", report_summary_json(report) + "\n");
  std::cout << report_summary_json(report) << "\n";
  return 0;
}

int cmd_analyze(const CommonOpts& opt) {
  SimConfig cfg = SimConfig::load(opt.config);
  const auto scenarios = prepared_scenarios(opt);
  std::ostringstream rows;
  for (const auto& s : scenarios) {
    const ShotRow row = run_shot(s, cfg);
    nlohmann::ordered_json j;
    j["shot_id"] = row.shot_id;
    j["status"] = to_string(row.status);
    j["speed_meas_mps"] = row.speed_meas;
    j["aoa_meas_deg"] = row.aoa_meas_deg;
    j["theta_x_deg"] = row.theta_x_deg;
    j["theta_y_deg"] = row.theta_y_deg;
    j["hit_top"] = {row.hit_top_meas.x, row.hit_top_meas.y};
    j["hit_bottom"] = {row.hit_bottom_meas.x, row.hit_bottom_meas.y};
    j["size_meas_m"] = row.size_meas;
    j["breaks"] = row.breaks;
    rows << j.dump() << "\n";
  }
  write_file(fs::path(opt.out) / "solutions.jsonl", rows.str());
  std::cout << rows.str();
  return 0;
}

DigitizedRecord synth_tone_record(double freq, double level_dbfs, double noise_dbfs_total,
                                  const AcsConfig& acs, uint64_t seed) {
  // single-channel stimulus, quantized like the board front end
  DigitizedRecord rec;
  rec.channel = 0;
  rec.sample_period = acs.sample_period();
  rec.t0 = 0.0;
  const int n = acs.record_len;
  const double amp = 0.5 * acs.full_scale * std::pow(10.0, level_dbfs / 20.0);
  const double noise_rms = (noise_dbfs_total > -300.0)
                               ? 0.5 * acs.full_scale / std::sqrt(2.0) *
                                     std::pow(10.0, noise_dbfs_total / 20.0)
                               : 0.0;
  Rng rng(seed);
  rec.samples.resize(static_cast<std::size_t>(n));
  const double lsb = acs.lsb();
  for (int i = 0; i < n; ++i) {
    const double t = i * rec.sample_period;
    double v = amp * std::sin(2.0 * M_PI * freq * t) + noise_rms * rng.gaussian();
    double code = std::nearbyint(v / lsb);
    code = std::clamp(code, static_cast<double>(acs.code_min()),
                      static_cast<double>(acs.code_max()));
    rec.samples[static_cast<std::size_t>(i)] = static_cast<int16_t>(code);
  }
  return rec;
}

int cmd_metrics(const CommonOpts& opt) {
  SimConfig cfg = SimConfig::load(opt.config);
  const AcsConfig& acs = cfg.acs;
  // single tone at 20 kHz, noise chosen to sit near the measured board
  const auto tone = synth_tone_record(20e3, 0.0, -65.0, acs, opt.seed);
  const SingleToneMetrics st = single_tone_metrics(tone, acs);

  // two-tone with a mild cubic channel for the intermod test
  DigitizedRecord two = synth_tone_record(20e3, -7.0, -90.0, acs, opt.seed + 1);
  {
    const double amp = 0.5 * acs.full_scale * std::pow(10.0, -7.0 / 20.0);
    const double alpha = 0.02 / (amp * amp);
    const double lsb = acs.lsb();
    for (int i = 0; i < acs.record_len; ++i) {
      const double t = i * two.sample_period;
      double v = amp * (std::sin(2.0 * M_PI * 20e3 * t) + std::sin(2.0 * M_PI * 22e3 * t));
      v += alpha * v * v * v;
      double code = std::nearbyint(v / lsb);
      code = std::clamp(code, static_cast<double>(acs.code_min()),
                        static_cast<double>(acs.code_max()));
      two.samples[static_cast<std::size_t>(i)] = static_cast<int16_t>(code);
    }
  }
  const Ip3Result ip3 = two_tone_ip3(two, 20e3, 22e3, acs);

  const double mds = mds_sweep(
      [&](double level) { return synth_tone_record(20e3, level, -65.0, acs, opt.seed + 2); },
      acs, 1.0);

  std::ostringstream csv;
  csv << "SNRFS_dB,SINAD_dB,IP3_dBFS,MDS_dBFS,SFDR_dB,ENOB_bits\n";
  csv << st.snrfs_db << ',' << st.sinad_db << ',' << ip3.ip3_dbfs << ',' << mds << ','
      << st.sfdr_db << ',' << st.enob_bits << "\n";
  write_file(fs::path(opt.out) / "metrics.csv", csv.str());

  const SpectrumResult sp = compute_spectrum(tone, acs.lsb(), acs.full_scale);
  std::ostringstream dump;
  dump << "# freq_hz power_dbfs\n";
  for (std::size_t k = 0; k < sp.freq.size(); ++k)
    dump << sp.freq[k] << " " << sp.power_db[k] << "\n";
  write_file(fs::path(opt.out) / "spectrum.txt", dump.str());
  std::cout << csv.str();
  return 0;
}

int cmd_calibrate(const CommonOpts& opt) {
  SimConfig cfg = SimConfig::load(opt.config);
  nlohmann::ordered_json out;
  for (int layer = 0; layer < kLayers; ++layer) {
    const double record_s = cfg.acs.record_len * cfg.acs.sample_period();
    const auto waves = piezo_pulse(layer, cfg.geometry, cfg.synth, 0.3 * record_s, 0.0,
                                   1.4 * record_s);
    std::array<Waveform, 8> padded;
    for (int s = 0; s < 4; ++s) padded[static_cast<std::size_t>(s)] = waves[static_cast<std::size_t>(s)];
    for (int s = 4; s < 8; ++s) {
      padded[static_cast<std::size_t>(s)] = waves[0];
      for (auto& v : padded[static_cast<std::size_t>(s)].samples) v = 0.0;
    }
    AcsConfig acs = cfg.acs;
    acs.trigger_threshold = std::max(1, acs.resolve_threshold(1e-4));
    std::array<Waveform, 8> filtered;
    for (int ch = 0; ch < 8; ++ch) filtered[ch] = highpass(padded[ch], acs);
    const auto captures = trigger_capture(interleave_and_digitize(filtered, acs), acs);
    if (captures.empty()) {
      out[layer == 0 ? "top" : "bottom"] = {{"ok", false}};
      continue;
    }
    std::array<DigitizedRecord, 4> recs;
    for (int s = 0; s < 4; ++s) recs[static_cast<std::size_t>(s)] = captures[0][static_cast<std::size_t>(s)];
    const double initial = cfg.geometry.wave_speed[layer] * 1.05;
    const CalibrationResult res =
        calibrate_wave_speed(recs, cfg.geometry, layer, initial, acs.lsb(), cfg.arrival);
    out[layer == 0 ? "top" : "bottom"] = {{"ok", res.ok},
                                          {"wave_speed_mps", res.wave_speed},
                                          {"iterations", res.iterations},
                                          {"initial_mps", initial},
                                          {"true_mps", cfg.geometry.wave_speed[layer]}};
  }
  write_file(fs::path(opt.out) / "calibration.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& in_csv, const std::string& out_dir) {
  std::ifstream in(in_csv);
  if (!in) throw std::runtime_error("cannot open " + in_csv);
  std::ostringstream buf;
  buf << in.rdbuf();
  CampaignReport report;
  report.rows = parse_report_csv(buf.str());
  report.aggregates = compute_aggregates(report.rows);
  const PlotData pd = report_plot_data(report);
  write_file(fs::path(out_dir) / "summary.json", report_summary_json(report) + "\n");
  write_file(fs::path(out_dir) / "position_errors.dat", pd.position_errors);
  write_file(fs::path(out_dir) / "amplitude_vs_size.dat", pd.amplitude_vs_size);
  write_file(fs::path(out_dir) / "regression_lines.dat", pd.regression_lines);
  std::cout << report_summary_json(report) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-layer orbital-debris impact sensor simulator"};
  app.require_subcommand(1);

  CommonOpts opt;
  bool dump_waveforms = false;
  std::vector<std::string> formats = {"csv", "json-lines", "plot-data"};
  std::string report_in;

  auto add_common = [&](CLI::App* sub, bool needs_scenario) {
    if (needs_scenario)
      sub->add_option("--scenario", opt.scenario, "scenario file")->required();
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--seed", opt.seed, "master seed");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--jobs", opt.jobs, "parallel shot workers");
  };

  auto* sim = app.add_subcommand("simulate", "synthesize physical signals only");
  add_common(sim, true);
  sim->add_flag("--dump-waveforms", dump_waveforms, "write raw f64 sensor waveforms");

  auto* acq = app.add_subcommand("acquire", "synthesize and digitize captures");
  add_common(acq, true);

  auto* ana = app.add_subcommand("analyze", "full pipeline, per-shot solutions");
  add_common(ana, true);

  auto* camp = app.add_subcommand("campaign", "closed loop over a scenario file");
  add_common(camp, true);
  camp->add_option("--format", formats, "csv, json-lines, plot-data");

  auto* met = app.add_subcommand("metrics", "acquisition dynamic-performance suite");
  add_common(met, false);

  auto* cal = app.add_subcommand("calibrate", "piezo wave-speed recovery");
  add_common(cal, false);

  auto* rep = app.add_subcommand("report", "re-aggregate an existing report.csv");
  rep->add_option("--in", report_in, "report.csv path")->required();
  rep->add_option("--out", opt.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(opt, dump_waveforms);
    if (acq->parsed()) return cmd_acquire(opt);
    if (ana->parsed()) return cmd_analyze(opt);
    if (camp->parsed()) return cmd_campaign(opt, formats);
    if (met->parsed()) return cmd_metrics(opt);
    if (cal->parsed()) return cmd_calibrate(opt);
    if (rep->parsed()) return cmd_report(report_in, opt.out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string what = e.what();
    return what.find("parse") != std::string::npos || what.find("config") != std::string::npos
               ? 1
               : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
