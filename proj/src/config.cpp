#include "mmodsim/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mmodsim {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_vec2(const json& j, const char* key, Vec2& out) {
  if (j.contains(key)) {
    const auto& a = j.at(key);
    out.x = a.at(0).get<double>();
    out.y = a.at(1).get<double>();
  }
}

json vec2_json(const Vec2& v) { return json::array({v.x, v.y}); }

json film_json(const FilmProps& f) {
  return json{{"group_speed", f.group_speed},
              {"dispersion_slope", f.dispersion_slope},
              {"attenuation_coeff", f.attenuation_coeff},
              {"center_freq", f.center_freq},
              {"burst_bandwidth", f.burst_bandwidth},
              {"attack_time", f.attack_time},
              {"decay_time", f.decay_time},
              {"base_sweep_time", f.base_sweep_time}};
}

void film_from(const json& j, FilmProps& f) {
  maybe(j, "group_speed", f.group_speed);
  maybe(j, "dispersion_slope", f.dispersion_slope);
  maybe(j, "attenuation_coeff", f.attenuation_coeff);
  maybe(j, "center_freq", f.center_freq);
  maybe(j, "burst_bandwidth", f.burst_bandwidth);
  maybe(j, "attack_time", f.attack_time);
  maybe(j, "decay_time", f.decay_time);
  maybe(j, "base_sweep_time", f.base_sweep_time);
}

}  // namespace

void SimConfig::finalize() {
  const double record_s = acs.record_len * acs.sample_period();
  synth.fit_stream(record_s);
}

void SimConfig::validate() const {
  geometry.validate();
  layout.validate();
  acs.validate();
}

std::string SimConfig::to_json() const {
  json j;
  j["geometry"] = {
      {"layer_separation_h", geometry.layer_separation_h},
      {"active_width", geometry.active_width},
      {"active_height", geometry.active_height},
      {"wave_speed", {geometry.wave_speed[0], geometry.wave_speed[1]}},
      {"piezo_position",
       {vec2_json(geometry.piezo_position[0]), vec2_json(geometry.piezo_position[1])}},
  };
  for (int layer = 0; layer < kLayers; ++layer) {
    json sensors = json::array();
    for (const auto& s : geometry.sensor_positions[layer]) sensors.push_back(vec2_json(s));
    j["geometry"]["sensors"].push_back(sensors);
  }
  j["layout"] = {{"traces_per_quadrant", layout.traces_per_quadrant},
                 {"traces_per_subgrid", layout.traces_per_subgrid},
                 {"trace_width", layout.trace_width},
                 {"trace_gap", layout.trace_gap},
                 {"trace_length", layout.trace_length},
                 {"trace_resistance", layout.trace_resistance},
                 {"sheet_resistivity", layout.sheet_resistivity},
                 {"tcr", layout.tcr},
                 {"min_recordable_diameter", layout.min_recordable_diameter},
                 {"empirical_break_ohms", layout.empirical_break_ohms}};
  j["synth"] = {{"film_top", film_json(synth.film[0])},
                {"film_bottom", film_json(synth.film[1])},
                {"oversample_rate", synth.oversample_rate},
                {"noise_rms_volts", synth.noise_rms_volts},
                {"impact_time", synth.impact_time},
                {"stream_duration", synth.stream_duration},
                {"piezo_center_freq", synth.piezo_center_freq},
                {"piezo_bandwidth", synth.piezo_bandwidth},
                {"piezo_amplitude", synth.piezo_amplitude},
                {"thermistor_noise_c", synth.thermistor_noise_c},
                {"amplitude",
                 {{"ref_diameter", synth.amplitude.ref_diameter},
                  {"slope_db_per_decade", synth.amplitude.slope_db_per_decade},
                  {"material_db", synth.amplitude.material_db}}}};
  j["acs"] = {{"hp_cutoff", acs.hp_cutoff},
              {"mux_rate", acs.mux_rate},
              {"adc_bits", acs.adc_bits},
              {"full_scale", acs.full_scale},
              {"record_len", acs.record_len},
              {"pretrigger_fraction", acs.pretrigger_fraction},
              {"trigger_threshold", acs.trigger_threshold},
              {"trigger_sigma", acs.trigger_sigma}};
  j["rgs"] = {{"source_current", rgs.source_current},
              {"current_tempco", rgs.current_tempco},
              {"electronics_temp_c", rgs.electronics_temp_c},
              {"sum_gain", rgs.sum_gain},
              {"sum_offset_volts", rgs.sum_offset_volts},
              {"diff_gain", rgs.diff_gain},
              {"adc_bits", rgs.adc_bits},
              {"full_scale", rgs.full_scale},
              {"averages", rgs.averages},
              {"noise_ohms_rms", rgs.noise_ohms_rms},
              {"thermistor_volts_per_c", rgs.thermistor_volts_per_c},
              {"thermistor_offset_c", rgs.thermistor_offset_c}};
  j["arrival"] = {{"threshold_fraction", arrival.threshold_fraction},
                  {"noise_window_fraction", arrival.noise_window_fraction},
                  {"interpolate", arrival.interpolate},
                  {"min_detectable_factor", arrival.min_detectable_factor}};
  j["ambient_temp_c"] = ambient_temp_c;
  return j.dump(2);
}

SimConfig SimConfig::from_json(const std::string& text) {
  SimConfig cfg;
  json j = json::parse(text);
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    maybe(g, "layer_separation_h", cfg.geometry.layer_separation_h);
    maybe(g, "active_width", cfg.geometry.active_width);
    maybe(g, "active_height", cfg.geometry.active_height);
    if (g.contains("wave_speed")) {
      cfg.geometry.wave_speed[0] = g["wave_speed"].at(0).get<double>();
      cfg.geometry.wave_speed[1] = g["wave_speed"].at(1).get<double>();
    }
    if (g.contains("piezo_position")) {
      for (int layer = 0; layer < kLayers; ++layer) {
        cfg.geometry.piezo_position[layer].x = g["piezo_position"].at(layer).at(0).get<double>();
        cfg.geometry.piezo_position[layer].y = g["piezo_position"].at(layer).at(1).get<double>();
      }
    }
    if (g.contains("sensors")) {
      for (int layer = 0; layer < kLayers; ++layer)
        for (int s = 0; s < kSensorsPerLayer; ++s) {
          cfg.geometry.sensor_positions[layer][s].x =
              g["sensors"].at(layer).at(s).at(0).get<double>();
          cfg.geometry.sensor_positions[layer][s].y =
              g["sensors"].at(layer).at(s).at(1).get<double>();
        }
    }
  }
  if (j.contains("layout")) {
    const auto& l = j["layout"];
    maybe(l, "traces_per_quadrant", cfg.layout.traces_per_quadrant);
    maybe(l, "traces_per_subgrid", cfg.layout.traces_per_subgrid);
    maybe(l, "trace_width", cfg.layout.trace_width);
    maybe(l, "trace_gap", cfg.layout.trace_gap);
    maybe(l, "trace_length", cfg.layout.trace_length);
    maybe(l, "trace_resistance", cfg.layout.trace_resistance);
    maybe(l, "sheet_resistivity", cfg.layout.sheet_resistivity);
    maybe(l, "tcr", cfg.layout.tcr);
    maybe(l, "min_recordable_diameter", cfg.layout.min_recordable_diameter);
    maybe(l, "empirical_break_ohms", cfg.layout.empirical_break_ohms);
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    if (s.contains("film_top")) film_from(s["film_top"], cfg.synth.film[0]);
    if (s.contains("film_bottom")) film_from(s["film_bottom"], cfg.synth.film[1]);
    maybe(s, "oversample_rate", cfg.synth.oversample_rate);
    maybe(s, "noise_rms_volts", cfg.synth.noise_rms_volts);
    maybe(s, "impact_time", cfg.synth.impact_time);
    maybe(s, "stream_duration", cfg.synth.stream_duration);
    maybe(s, "piezo_center_freq", cfg.synth.piezo_center_freq);
    maybe(s, "piezo_bandwidth", cfg.synth.piezo_bandwidth);
    maybe(s, "piezo_amplitude", cfg.synth.piezo_amplitude);
    maybe(s, "thermistor_noise_c", cfg.synth.thermistor_noise_c);
    if (s.contains("amplitude")) {
      const auto& a = s["amplitude"];
      maybe(a, "ref_diameter", cfg.synth.amplitude.ref_diameter);
      maybe(a, "slope_db_per_decade", cfg.synth.amplitude.slope_db_per_decade);
      if (a.contains("material_db"))
        for (std::size_t i = 0; i < cfg.synth.amplitude.material_db.size(); ++i)
          cfg.synth.amplitude.material_db[i] = a["material_db"].at(i).get<double>();
    }
  }
  if (j.contains("acs")) {
    const auto& a = j["acs"];
    maybe(a, "hp_cutoff", cfg.acs.hp_cutoff);
    maybe(a, "mux_rate", cfg.acs.mux_rate);
    maybe(a, "adc_bits", cfg.acs.adc_bits);
    maybe(a, "full_scale", cfg.acs.full_scale);
    maybe(a, "record_len", cfg.acs.record_len);
    maybe(a, "pretrigger_fraction", cfg.acs.pretrigger_fraction);
    maybe(a, "trigger_threshold", cfg.acs.trigger_threshold);
    maybe(a, "trigger_sigma", cfg.acs.trigger_sigma);
  }
  if (j.contains("rgs")) {
    const auto& r = j["rgs"];
    maybe(r, "source_current", cfg.rgs.source_current);
    maybe(r, "current_tempco", cfg.rgs.current_tempco);
    maybe(r, "electronics_temp_c", cfg.rgs.electronics_temp_c);
    maybe(r, "sum_gain", cfg.rgs.sum_gain);
    maybe(r, "sum_offset_volts", cfg.rgs.sum_offset_volts);
    maybe(r, "diff_gain", cfg.rgs.diff_gain);
    maybe(r, "adc_bits", cfg.rgs.adc_bits);
    maybe(r, "full_scale", cfg.rgs.full_scale);
    maybe(r, "averages", cfg.rgs.averages);
    maybe(r, "noise_ohms_rms", cfg.rgs.noise_ohms_rms);
    maybe(r, "thermistor_volts_per_c", cfg.rgs.thermistor_volts_per_c);
    maybe(r, "thermistor_offset_c", cfg.rgs.thermistor_offset_c);
  }
  if (j.contains("arrival")) {
    const auto& a = j["arrival"];
    maybe(a, "threshold_fraction", cfg.arrival.threshold_fraction);
    maybe(a, "noise_window_fraction", cfg.arrival.noise_window_fraction);
    maybe(a, "interpolate", cfg.arrival.interpolate);
    maybe(a, "min_detectable_factor", cfg.arrival.min_detectable_factor);
  }
  maybe(j, "ambient_temp_c", cfg.ambient_temp_c);
  cfg.finalize();
  cfg.validate();
  return cfg;
}

SimConfig SimConfig::load(const std::string& path) {
  if (path.empty()) {
    SimConfig cfg;
    cfg.finalize();
    return cfg;
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

uint64_t SimConfig::digest() const {
  const std::string canonical = to_json();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mmodsim
