#include "mmodsim/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "mmodsim/rng.hpp"

namespace mmodsim {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& origin, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                             ": bad numeric field '" + s + "'");
  }
}

}  // namespace

std::vector<ImpactScenario> parse_scenarios(const std::string& text,
                                            const std::string& origin) {
  std::vector<ImpactScenario> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // first non-comment line is the header
      if (line.find("shot_id") == std::string::npos)
        throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                 ": missing header line");
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() < 8)
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected at least 8 fields, got " +
                               std::to_string(f.size()));
    ImpactScenario s;
    s.shot_id = static_cast<int>(parse_double(f[0], origin, line_no));
    try {
      s.material = material_from_string(f[1]);
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
    s.diameter = parse_double(f[2], origin, line_no);
    s.speed = parse_double(f[3], origin, line_no);
    s.aoa_x_deg = parse_double(f[4], origin, line_no);
    s.aoa_y_deg = parse_double(f[5], origin, line_no);
    s.entry_point = {parse_double(f[6], origin, line_no), parse_double(f[7], origin, line_no)};
    if (f.size() > 8 && !f[8].empty()) s.snr_target_db = parse_double(f[8], origin, line_no);
    if (f.size() > 9 && !f[9].empty())
      s.rng_seed = static_cast<uint64_t>(parse_double(f[9], origin, line_no));
    out.push_back(s);
  }
  return out;
}

std::vector<ImpactScenario> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenarios(buf.str(), path);
}

const char* to_string(ShotStatus s) {
  switch (s) {
    case ShotStatus::Ok: return "ok";
    case ShotStatus::ClippedTransit: return "clipped_transit";
    case ShotStatus::NoTrigger: return "no_trigger";
    case ShotStatus::WeakSignal: return "weak_signal";
    case ShotStatus::NoGridChange: return "no_grid_change";
    default: return "failed";
  }
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// pick the capture whose energy detector sees the most signal; false
// triggers on noise spikes produce captures with tiny E_max
std::size_t best_capture(const std::vector<std::array<DigitizedRecord, 8>>& captures,
                         const SimConfig& cfg) {
  std::size_t best = 0;
  double best_e = -1.0;
  for (std::size_t i = 0; i < captures.size(); ++i) {
    double e = 0.0;
    for (const auto& rec : captures[i]) {
      const ArrivalResult r = energy_arrival_time(rec, cfg.acs.lsb(), cfg.arrival);
      if (r.detected) e += r.e_max;
    }
    if (e > best_e) {
      best_e = e;
      best = i;
    }
  }
  return best;
}

}  // namespace

ShotRow run_shot(const ImpactScenario& scenario, const SimConfig& cfg, Cdss* cdss) {
  ShotRow row;
  row.shot_id = scenario.shot_id;
  row.material = material_name(scenario.material);
  row.diameter = scenario.diameter;
  row.speed_true = scenario.speed;
  row.seed = scenario.rng_seed;
  const double tx = std::tan(scenario.aoa_x_deg * M_PI / 180.0);
  const double ty = std::tan(scenario.aoa_y_deg * M_PI / 180.0);
  row.aoa_true_deg = std::atan(std::sqrt(tx * tx + ty * ty)) * 180.0 / M_PI;
  row.pos_err_top = row.pos_err_bottom = row.speed_err = row.aoa_err_deg = kNaN;
  row.speed_meas = row.aoa_meas_deg = kNaN;

  // synth
  PhysicalSignals sig;
  try {
    sig = simulate_shot(scenario, cfg.geometry, cfg.layout, cfg.synth);
  } catch (const std::domain_error&) {
    row.status = ShotStatus::ClippedTransit;
    return row;
  }
  row.hit_top_true = sig.true_hit_top;
  row.hit_bottom_true = sig.true_hit_bottom;

  // acquisition
  AcsConfig acs = cfg.acs;
  acs.trigger_threshold = acs.resolve_threshold(sig.noise_rms);
  std::array<Waveform, 8> filtered;
  for (int ch = 0; ch < 8; ++ch) filtered[ch] = highpass(sig.waveforms[ch], acs);
  const SampledStream stream = interleave_and_digitize(filtered, acs);
  const auto captures = trigger_capture(stream, acs);
  if (captures.empty()) {
    row.status = ShotStatus::NoTrigger;
    return row;
  }
  const auto& capture = captures[best_capture(captures, cfg)];

  // controller: log the event, measure the grid, store with TMR + CRC
  const double temp_delta = cfg.ambient_temp_c - 25.0;
  std::array<double, 8> corner_temps;
  corner_temps.fill(cfg.ambient_temp_c);
  const auto temps =
      thermistor_readout(corner_temps, cfg.synth.thermistor_noise_c, scenario.rng_seed);
  const GridMeasurement gm = rgs_measure(sig.break_state, cfg.layout, temp_delta, cfg.rgs,
                                         temps, scenario.rng_seed, sig.impact_time_top);

  Cdss local_cdss;
  Cdss& ctl = cdss ? *cdss : local_cdss;
  if (ctl.state() == CdssState::Initialization) ctl.dispatch(CdssEvent::InitDone);
  ctl.advance_time(sig.impact_time_top);
  ctl.dispatch(CdssEvent::ImpactTrigger);
  EventRecord event;
  event.kind = RecordKind::Impact;
  event.timestamp = ctl.clock_now();
  event.acoustic.assign(capture.begin(), capture.end());
  event.grid = gm;
  event.temps = temps;
  const uint64_t idx = ctl.store_event(event);
  ctl.complete();
  const ReadResult stored = ctl.store().read(idx);
  row.storage_status = stored.status;
  const EventRecord replay = EventRecord::deserialize(stored.payload);

  // analysis, from the stored record
  std::array<LayerHit, kLayers> hits;
  double peak_v = 0.0, best_e = 0.0;
  double snr_num = 0.0;
  for (int layer = 0; layer < kLayers; ++layer) {
    std::array<double, kSensorsPerLayer> arrivals;
    arrivals.fill(kNaN);
    int usable = 0;
    for (int s = 0; s < kSensorsPerLayer; ++s) {
      const DigitizedRecord& rec = replay.acoustic[static_cast<std::size_t>(layer * 4 + s)];
      const ArrivalResult r = energy_arrival_time(rec, acs.lsb(), cfg.arrival);
      if (r.detected) {
        arrivals[static_cast<std::size_t>(s)] = r.time;
        ++usable;
      }
      const Waveform w = rec.to_waveform(acs.lsb());
      const double pk = w.peak_abs();
      if (pk > peak_v) {
        peak_v = pk;
        best_e = r.e_max;
        // noise rms from the leading pre-trigger segment
        double acc = 0.0;
        const auto m = static_cast<std::size_t>(cfg.arrival.noise_window_fraction *
                                                w.samples.size());
        for (std::size_t i = 0; i < m; ++i) acc += w.samples[i] * w.samples[i];
        snr_num = (m > 0 && acc > 0.0) ? pk / std::sqrt(acc / static_cast<double>(m)) : 0.0;
      }
    }
    if (usable < 3) {
      row.status = ShotStatus::WeakSignal;
      return row;
    }
    hits[layer] = multilaterate(arrivals, cfg.geometry.sensor_positions[layer],
                                cfg.geometry.wave_speed[layer], cfg.geometry, layer);
  }
  row.peak_amplitude = peak_v;
  row.sqrt_energy = best_e > 0.0 ? std::sqrt(best_e) : 0.0;
  row.snr_meas_db = snr_num > 0.0 ? 20.0 * std::log10(snr_num) : kNaN;

  ImpactSolution sol;
  try {
    sol = solve_impact(hits[kTopLayer], hits[kBottomLayer], cfg.geometry.layer_separation_h);
  } catch (const std::domain_error&) {
    row.status = ShotStatus::Failed;
    return row;
  }
  const SizeEstimate size = estimate_size(*replay.grid, cfg.layout, cfg.rgs);

  row.status = ShotStatus::Ok;
  row.hit_top_meas = sol.top.position;
  row.hit_bottom_meas = sol.bottom.position;
  row.speed_meas = sol.speed;
  row.theta_x_deg = sol.theta_x_deg;
  row.theta_y_deg = sol.theta_y_deg;
  row.aoa_meas_deg = sol.aoa_total_deg();
  row.size_meas = size.below_threshold ? 0.0 : size.diameter;
  row.breaks = size.breaks;
  row.pos_err_top = distance(row.hit_top_meas, row.hit_top_true);
  row.pos_err_bottom = distance(row.hit_bottom_meas, row.hit_bottom_true);
  row.speed_err = row.speed_meas - row.speed_true;
  row.aoa_err_deg = row.aoa_meas_deg - row.aoa_true_deg;
  return row;
}

Aggregates compute_aggregates(const std::vector<ShotRow>& rows) {
  Aggregates agg;
  agg.rows = static_cast<int>(rows.size());
  auto accumulate = [](const std::vector<double>& v, double& mean, double& stddev) {
    if (v.empty()) {
      mean = stddev = 0.0;
      return;
    }
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    mean = m;
    stddev = v.size() > 1 ? std::sqrt(s2 / static_cast<double>(v.size() - 1)) : 0.0;
  };
  std::vector<double> pt, pb, aoa, spd;
  for (const auto& r : rows) {
    if (r.status != ShotStatus::Ok) continue;
    ++agg.ok;
    pt.push_back(r.pos_err_top);
    pb.push_back(r.pos_err_bottom);
    aoa.push_back(std::fabs(r.aoa_err_deg));
    spd.push_back(std::fabs(r.speed_err));
  }
  accumulate(pt, agg.mean_pos_err_top, agg.std_pos_err_top);
  accumulate(pb, agg.mean_pos_err_bottom, agg.std_pos_err_bottom);
  accumulate(aoa, agg.mean_aoa_err, agg.std_aoa_err);
  accumulate(spd, agg.mean_speed_err, agg.std_speed_err);
  return agg;
}

CampaignReport run_campaign(const std::vector<ImpactScenario>& scenarios,
                            const SimConfig& cfg, uint64_t master_seed, int jobs) {
  CampaignReport report;
  report.master_seed = master_seed;
  report.config_digest = cfg.digest();
  report.rows.resize(scenarios.size());

  std::vector<ImpactScenario> prepared = scenarios;
  for (auto& s : prepared) {
    if (s.rng_seed == 0)
      s.rng_seed = mix_seed(master_seed, static_cast<uint64_t>(s.shot_id));
  }

  if (jobs <= 1 || prepared.size() <= 1) {
    for (std::size_t i = 0; i < prepared.size(); ++i)
      report.rows[i] = run_shot(prepared[i], cfg);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&]() {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= prepared.size()) return;
          i = next++;
        }
        report.rows[i] = run_shot(prepared[i], cfg);
      }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(jobs, static_cast<int>(prepared.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::sort(report.rows.begin(), report.rows.end(),
            [](const ShotRow& a, const ShotRow& b) { return a.shot_id < b.shot_id; });
  report.aggregates = compute_aggregates(report.rows);
  return report;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const char* kCsvHeader =
    "shot_id,status,material,diameter_m,speed_true_mps,aoa_true_deg,"
    "hit_top_true_x,hit_top_true_y,hit_bottom_true_x,hit_bottom_true_y,"
    "speed_meas_mps,aoa_meas_deg,theta_x_deg,theta_y_deg,"
    "hit_top_meas_x,hit_top_meas_y,hit_bottom_meas_x,hit_bottom_meas_y,"
    "size_meas_m,breaks,snr_meas_db,peak_v,sqrt_energy,"
    "pos_err_top_m,pos_err_bottom_m,speed_err_mps,aoa_err_deg,seed,storage";

}  // namespace

std::string report_csv(const CampaignReport& report) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  for (const auto& r : report.rows) {
    os << r.shot_id << ',' << to_string(r.status) << ',' << r.material << ','
       << fmt(r.diameter) << ',' << fmt(r.speed_true) << ',' << fmt(r.aoa_true_deg) << ','
       << fmt(r.hit_top_true.x) << ',' << fmt(r.hit_top_true.y) << ','
       << fmt(r.hit_bottom_true.x) << ',' << fmt(r.hit_bottom_true.y) << ','
       << fmt(r.speed_meas) << ',' << fmt(r.aoa_meas_deg) << ',' << fmt(r.theta_x_deg) << ','
       << fmt(r.theta_y_deg) << ',' << fmt(r.hit_top_meas.x) << ',' << fmt(r.hit_top_meas.y)
       << ',' << fmt(r.hit_bottom_meas.x) << ',' << fmt(r.hit_bottom_meas.y) << ','
       << fmt(r.size_meas) << ',' << r.breaks << ',' << fmt(r.snr_meas_db) << ','
       << fmt(r.peak_amplitude) << ',' << fmt(r.sqrt_energy) << ',' << fmt(r.pos_err_top)
       << ',' << fmt(r.pos_err_bottom) << ',' << fmt(r.speed_err) << ','
       << fmt(r.aoa_err_deg) << ',' << r.seed << ',' << static_cast<int>(r.storage_status)
       << "\n";
  }
  return os.str();
}

std::vector<ShotRow> parse_report_csv(const std::string& text) {
  std::vector<ShotRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() < 29) throw std::runtime_error("short report row");
    ShotRow r;
    int i = 0;
    r.shot_id = std::stoi(f[i++]);
    const std::string status = f[i++];
    for (int s = 0; s <= static_cast<int>(ShotStatus::Failed); ++s)
      if (status == to_string(static_cast<ShotStatus>(s)))
        r.status = static_cast<ShotStatus>(s);
    r.material = f[i++];
    r.diameter = std::stod(f[i++]);
    r.speed_true = std::stod(f[i++]);
    r.aoa_true_deg = std::stod(f[i++]);
    r.hit_top_true.x = std::stod(f[i++]);
    r.hit_top_true.y = std::stod(f[i++]);
    r.hit_bottom_true.x = std::stod(f[i++]);
    r.hit_bottom_true.y = std::stod(f[i++]);
    r.speed_meas = std::stod(f[i++]);
    r.aoa_meas_deg = std::stod(f[i++]);
    r.theta_x_deg = std::stod(f[i++]);
    r.theta_y_deg = std::stod(f[i++]);
    r.hit_top_meas.x = std::stod(f[i++]);
    r.hit_top_meas.y = std::stod(f[i++]);
    r.hit_bottom_meas.x = std::stod(f[i++]);
    r.hit_bottom_meas.y = std::stod(f[i++]);
    r.size_meas = std::stod(f[i++]);
    r.breaks = std::stoi(f[i++]);
    r.snr_meas_db = std::stod(f[i++]);
    r.peak_amplitude = std::stod(f[i++]);
    r.sqrt_energy = std::stod(f[i++]);
    r.pos_err_top = std::stod(f[i++]);
    r.pos_err_bottom = std::stod(f[i++]);
    r.speed_err = std::stod(f[i++]);
    r.aoa_err_deg = std::stod(f[i++]);
    r.seed = std::stoull(f[i++]);
    r.storage_status = static_cast<ReadStatus>(std::stoi(f[i++]));
    rows.push_back(r);
  }
  return rows;
}

std::string report_jsonl(const CampaignReport& report) {
  std::ostringstream os;
  for (const auto& r : report.rows) {
    nlohmann::ordered_json j;
    j["shot_id"] = r.shot_id;
    j["status"] = to_string(r.status);
    j["material"] = r.material;
    j["diameter_m"] = r.diameter;
    j["speed_true_mps"] = r.speed_true;
    j["aoa_true_deg"] = r.aoa_true_deg;
    j["speed_meas_mps"] = r.speed_meas;
    j["aoa_meas_deg"] = r.aoa_meas_deg;
    j["hit_top_meas"] = {r.hit_top_meas.x, r.hit_top_meas.y};
    j["hit_bottom_meas"] = {r.hit_bottom_meas.x, r.hit_bottom_meas.y};
    j["size_meas_m"] = r.size_meas;
    j["breaks"] = r.breaks;
    j["snr_meas_db"] = r.snr_meas_db;
    j["pos_err_top_m"] = r.pos_err_top;
    j["pos_err_bottom_m"] = r.pos_err_bottom;
    j["speed_err_mps"] = r.speed_err;
    j["aoa_err_deg"] = r.aoa_err_deg;
    j["seed"] = r.seed;
    os << j.dump() << "\n";
  }
  return os.str();
}

std::string report_summary_json(const CampaignReport& report) {
  nlohmann::ordered_json j;
  j["rows"] = report.aggregates.rows;
  j["ok"] = report.aggregates.ok;
  j["mean_pos_err_top_m"] = report.aggregates.mean_pos_err_top;
  j["std_pos_err_top_m"] = report.aggregates.std_pos_err_top;
  j["mean_pos_err_bottom_m"] = report.aggregates.mean_pos_err_bottom;
  j["std_pos_err_bottom_m"] = report.aggregates.std_pos_err_bottom;
  j["mean_aoa_err_deg"] = report.aggregates.mean_aoa_err;
  j["std_aoa_err_deg"] = report.aggregates.std_aoa_err;
  j["mean_speed_err_mps"] = report.aggregates.mean_speed_err;
  j["std_speed_err_mps"] = report.aggregates.std_speed_err;
  j["master_seed"] = report.master_seed;
  j["config_digest"] = report.config_digest;
  return j.dump(2);
}

PlotData report_plot_data(const CampaignReport& report) {
  PlotData pd;
  {
    std::ostringstream os;
    os << "# shot_id layer position_error_m\n";
    for (const auto& r : report.rows) {
      if (r.status != ShotStatus::Ok) continue;
      os << r.shot_id << " 1 " << fmt(r.pos_err_top) << "\n";
      os << r.shot_id << " 2 " << fmt(r.pos_err_bottom) << "\n";
    }
    pd.position_errors = os.str();
  }
  std::vector<double> d, amp, sqe;
  {
    std::ostringstream os;
    os << "# diameter_m peak_v sqrt_energy\n";
    for (const auto& r : report.rows) {
      if (r.status != ShotStatus::Ok || r.peak_amplitude <= 0.0) continue;
      os << fmt(r.diameter) << " " << fmt(r.peak_amplitude) << " " << fmt(r.sqrt_energy)
         << "\n";
      d.push_back(r.diameter);
      amp.push_back(r.peak_amplitude);
      if (r.sqrt_energy > 0.0) sqe.push_back(r.sqrt_energy);
    }
    pd.amplitude_vs_size = os.str();
  }
  {
    std::ostringstream os;
    os << "# diameter_m fit_peak_v fit_sqrt_energy\n";
    if (d.size() >= 3) {
      const RegressionStats ra = regress_loglinear(d, amp);
      const RegressionStats re =
          (sqe.size() == d.size()) ? regress_loglinear(d, sqe) : RegressionStats{};
      const double lo = *std::min_element(d.begin(), d.end());
      const double hi = *std::max_element(d.begin(), d.end());
      for (int i = 0; i <= 32; ++i) {
        const double x =
            std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i / 32.0);
        const double ya = std::pow(10.0, ra.intercept + ra.slope * std::log10(x));
        const double ye = (sqe.size() == d.size())
                              ? std::pow(10.0, re.intercept + re.slope * std::log10(x))
                              : 0.0;
        os << fmt(x) << " " << fmt(ya) << " " << fmt(ye) << "\n";
      }
    }
    pd.regression_lines = os.str();
  }
  return pd;
}

}  // namespace mmodsim
