#pragma once

#include <string>
#include <vector>

#include "mmodsim/analysis.hpp"
#include "mmodsim/config.hpp"
#include "mmodsim/controller.hpp"
#include "mmodsim/synth.hpp"

namespace mmodsim {

/// Scenario file: comma-separated, '#' comments, one shot per line.
/// Columns: shot_id, material, diameter_m, speed_mps, aoa_x_deg,
/// aoa_y_deg, entry_x_m, entry_y_m, snr_db (blank = amplitude law),
/// seed (0 = derive from the master seed).
std::vector<ImpactScenario> load_scenarios(const std::string& path);
std::vector<ImpactScenario> parse_scenarios(const std::string& text,
                                            const std::string& origin = "<memory>");

enum class ShotStatus {
  Ok = 0,
  ClippedTransit,
  NoTrigger,
  WeakSignal,   // fewer than 3 usable arrivals on a layer
  NoGridChange, // acoustic solution without a recordable resistance change
  Failed,
};

const char* to_string(ShotStatus s);

struct ShotRow {
  int shot_id = 0;
  ShotStatus status = ShotStatus::Failed;
  std::string material;
  double diameter = 0.0;
  // ground truth
  double speed_true = 0.0;
  double aoa_true_deg = 0.0;
  Vec2 hit_top_true{}, hit_bottom_true{};
  // measured
  double speed_meas = 0.0;
  double aoa_meas_deg = 0.0;
  double theta_x_deg = 0.0, theta_y_deg = 0.0;
  Vec2 hit_top_meas{}, hit_bottom_meas{};
  double size_meas = 0.0;      // m, 0 when below threshold
  int breaks = 0;
  double snr_meas_db = 0.0;
  double peak_amplitude = 0.0;  // V at the strongest sensor
  double sqrt_energy = 0.0;     // sqrt of the detector's E_max there
  // errors (NaN when not measurable)
  double pos_err_top = 0.0, pos_err_bottom = 0.0;
  double speed_err = 0.0, aoa_err_deg = 0.0;
  uint64_t seed = 0;
  ReadStatus storage_status = ReadStatus::Clean;
};

struct Aggregates {
  int rows = 0;
  int ok = 0;
  double mean_pos_err_top = 0.0, std_pos_err_top = 0.0;
  double mean_pos_err_bottom = 0.0, std_pos_err_bottom = 0.0;
  double mean_aoa_err = 0.0, std_aoa_err = 0.0;
  double mean_speed_err = 0.0, std_speed_err = 0.0;
};

struct CampaignReport {
  std::vector<ShotRow> rows;  // sorted by shot_id
  Aggregates aggregates;
  uint64_t master_seed = 0;
  uint64_t config_digest = 0;
};

/// One shot through synth -> acquisition -> controller -> analysis.
ShotRow run_shot(const ImpactScenario& scenario, const SimConfig& cfg, Cdss* cdss = nullptr);

/// Whole campaign; failures become status rows, never exceptions.
/// jobs > 1 runs shots on a small thread pool; rows come back sorted by
/// shot_id so the report does not depend on scheduling.
CampaignReport run_campaign(const std::vector<ImpactScenario>& scenarios,
                            const SimConfig& cfg, uint64_t master_seed, int jobs = 1);

Aggregates compute_aggregates(const std::vector<ShotRow>& rows);

std::string report_csv(const CampaignReport& report);
std::string report_jsonl(const CampaignReport& report);
std::string report_summary_json(const CampaignReport& report);
std::vector<ShotRow> parse_report_csv(const std::string& text);

/// Plot data: per-shot position error bars and the amplitude-vs-size
/// scatter with its log-log regression overlay.
struct PlotData {
  std::string position_errors;   // shot_id, layer, err_m
  std::string amplitude_vs_size; // diameter_m, peak_v, sqrt_energy
  std::string regression_lines;  // diameter_m, fit_peak_v, fit_sqrt_e
};
PlotData report_plot_data(const CampaignReport& report);

}  // namespace mmodsim
