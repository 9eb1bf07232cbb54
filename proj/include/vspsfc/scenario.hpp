#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vspsfc/ampc.hpp"
#include "vspsfc/baselines.hpp"
#include "vspsfc/common.hpp"
#include "vspsfc/grid.hpp"
#include "vspsfc/system_model.hpp"
#include "vspsfc/tuner.hpp"

namespace vspsfc {

struct SimSection {
  double duration = 40.0;
  double dt_truth = 0.001;
  double dt_ctrl = 0.1;
  double output_dt = 0.01;
  unsigned seed = 1;
  double measurement_noise_std = 0.0;
};

struct ControllerSection {
  std::string mode;  // "fsps", "vic" or "ampc"
  AmpcConfig ampc;
  VicConfig vic;
  FspsGovParams fsps;
};

struct ScenarioConfig {
  std::string description;
  GridParams grid;
  PlantConfig plant;
  ControllerSection controller;
  Disturbance disturbance;
  SimSection sim;

  std::string canonical;                // resolved canonical JSON text
  std::string canonical_ex_controller;  // same with the controller subtree removed

  std::uint64_t hash() const;
  std::uint64_t hash_ex_controller() const;
};

/// Parses and validates a scenario file. Unknown keys, missing fields and
/// out-of-range values are reported with their JSON path. Referenced hill
/// chart files are resolved relative to the config file and inlined into the
/// canonical form so the hash covers the full plant description.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& json_text, const std::string& base_dir);

struct ScenarioResult {
  std::string mode;
  std::vector<std::string> columns;         // first column is time
  std::vector<std::vector<double>> rows;
  NadirMetrics metrics;
  std::uint64_t config_hash = 0;
  std::uint64_t config_hash_ex_controller = 0;
  std::map<std::string, double> extra_metrics;

  int column(const std::string& name) const;  // -1 when absent
  std::vector<double> series(const std::string& name) const;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

std::string to_csv(const ScenarioResult& result);
void write_result(const ScenarioResult& result, const std::string& out_dir);
ScenarioResult read_result(const std::string& csv_path, const std::string& metrics_path);
ScenarioResult read_metrics(const std::string& metrics_path);

std::uint64_t fnv1a(const std::string& text);

struct CompareEntry {
  std::string mode;
  NadirMetrics metrics;
};

struct CompareReport {
  std::vector<CompareEntry> entries;
  // improvement of |nadir| relative to the fsps entry, percent, keyed by mode
  std::map<std::string, double> improvement_vs_fsps;
  double ampc_vs_vic = 0.0;

  std::string table() const;
  std::string csv() const;
};

/// Requires every result to share the ex-controller config hash; improvement
/// percentages are relative to the fsps entry when present.
CompareReport compare_report(const std::vector<ScenarioResult>& results);

/// Closed-loop gain search for the VIC baseline: minimizes |nadir| over
/// (k_inertia, k_droop) with candidates rejected when the exact operating
/// limits are violated on the trajectory.
VicConfig tune_vic(const ScenarioConfig& scenario, double k_in_max, double k_dr_max,
                   const PatternSearchConfig* ps_overrides = nullptr, PatternSearchHistory* history = nullptr);

/// Closed-loop weight search for the controller (p_pcc, p_i), horizons fixed.
AmpcConfig tune_ampc_closed_loop(const ScenarioConfig& scenario, const PatternSearchConfig* ps_overrides = nullptr,
                                 PatternSearchHistory* history = nullptr);

/// Largest trajectory violation of the exact unit limits, as a fraction of
/// the respective rating (0 when inside limits everywhere).
double max_limit_violation(const ScenarioResult& result, const ScenarioConfig& cfg);

}  // namespace vspsfc
