#include "CLI11.hpp"

#include "vspsfc/scenario.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitSimAbort = 3;

int do_run(const std::string& config_path, const std::string& out_dir) {
  vspsfc::ScenarioConfig cfg = vspsfc::load_scenario(config_path);
  vspsfc::ScenarioResult res = vspsfc::run_scenario(cfg);
  if (!out_dir.empty()) vspsfc::write_result(res, out_dir);
  std::printf("mode: %s\n", res.mode.c_str());
  std::printf("config hash: %016llx (ex-controller %016llx)\n",
              static_cast<unsigned long long>(res.config_hash),
              static_cast<unsigned long long>(res.config_hash_ex_controller));
  std::printf("nadir: %.6f pu at t=%.3f s\n", res.metrics.nadir, res.metrics.t_nadir);
  std::printf("rocof_max: %.6f pu/s, settling: %.3f s\n", res.metrics.rocof_max,
              res.metrics.settling_band_entry);
  for (const auto& [k, v] : res.extra_metrics) std::printf("%s: %.6g\n", k.c_str(), v);
  if (!out_dir.empty()) std::printf("wrote %s/%s.csv and %s_metrics.json\n", out_dir.c_str(),
                                    res.mode.c_str(), res.mode.c_str());
  return kExitOk;
}

int do_compare(const std::vector<std::string>& metrics_paths, const std::string& out_dir) {
  std::vector<vspsfc::ScenarioResult> results;
  for (const auto& p : metrics_paths) results.push_back(vspsfc::read_metrics(p));
  vspsfc::CompareReport rep = vspsfc::compare_report(results);
  std::cout << rep.table();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / "compare.csv");
    f << rep.csv();
    std::cout << "wrote " << out_dir << "/compare.csv\n";
  }
  return kExitOk;
}

int do_tune(const std::string& config_path, const std::string& target, const std::string& out_path,
            double duration_override, int threads) {
  vspsfc::ScenarioConfig cfg = vspsfc::load_scenario(config_path);
  if (duration_override > 0.0) cfg.sim.duration = duration_override;

  vspsfc::PatternSearchHistory history;
  if (target == "vic") {
    vspsfc::PatternSearchConfig ps;
    ps.threads = threads;
    vspsfc::VicConfig tuned = vspsfc::tune_vic(cfg, 40.0, 40.0, nullptr, &history);
    std::printf("tuned VIC gains: k_inertia=%.6g k_droop=%.6g (|nadir|=%.6g, %d iterations)\n",
                tuned.k_inertia, tuned.k_droop,
                history.best_objectives.empty() ? 0.0 : history.best_objectives.back(), history.iterations);
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      f << "{ \"k_inertia\": " << tuned.k_inertia << ", \"k_droop\": " << tuned.k_droop << " }\n";
    }
  } else if (target == "ampc") {
    vspsfc::AmpcConfig tuned = vspsfc::tune_ampc_closed_loop(cfg, nullptr, &history);
    std::printf("tuned AMPC weights: weight_pcc=%.6g", tuned.weight_pcc);
    std::printf(" weight_rotor=[");
    for (std::size_t i = 0; i < tuned.weight_rotor.size(); ++i)
      std::printf("%s%.6g", i ? ", " : "", tuned.weight_rotor[i]);
    std::printf("] (|nadir|=%.6g, %d iterations)\n",
                history.best_objectives.empty() ? 0.0 : history.best_objectives.back(), history.iterations);
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      f << "{ \"weight_pcc\": " << tuned.weight_pcc << ", \"weight_rotor\": [";
      for (std::size_t i = 0; i < tuned.weight_rotor.size(); ++i)
        f << (i ? ", " : "") << tuned.weight_rotor[i];
      f << "] }\n";
    }
  } else {
    std::fprintf(stderr, "unknown tune target '%s' (expected ampc or vic)\n", target.c_str());
    return kExitValidation;
  }
  return kExitOk;
}

int do_validate(const std::string& config_path) {
  vspsfc::ScenarioConfig cfg = vspsfc::load_scenario(config_path);
  std::printf("OK: %s\n", config_path.c_str());
  std::printf("config hash: %016llx (ex-controller %016llx)\n",
              static_cast<unsigned long long>(cfg.hash()),
              static_cast<unsigned long long>(cfg.hash_ex_controller()));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pumped-storage primary frequency control co-simulation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, target = "ampc", out_path;
  std::vector<std::string> metrics_paths;
  double duration_override = 0.0;
  int threads = 1;

  auto* run = app.add_subcommand("run", "Run one closed-loop scenario");
  run->add_option("config", config_path, "scenario config file")->required();
  run->add_option("--out", out_dir, "output directory for CSV and metrics");

  auto* cmp = app.add_subcommand("compare", "Compare runs of the same scenario");
  cmp->add_option("metrics", metrics_paths, "metrics JSON files")->required()->expected(-1);
  cmp->add_option("--out", out_dir, "output directory for the comparison CSV");

  auto* tune = app.add_subcommand("tune", "Search controller parameters on a scenario");
  tune->add_option("config", config_path, "scenario config file")->required();
  tune->add_option("--target", target, "ampc or vic")->check(CLI::IsMember({"ampc", "vic"}));
  tune->add_option("--out", out_path, "write tuned parameters to this file");
  tune->add_option("--duration", duration_override, "override scenario duration (s)");
  tune->add_option("--threads", threads, "parallel candidate evaluations");

  auto* val = app.add_subcommand("validate", "Validate a scenario config");
  val->add_option("config", config_path, "scenario config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return do_run(config_path, out_dir);
    if (*cmp) return do_compare(metrics_paths, out_dir);
    if (*tune) return do_tune(config_path, target, out_path, duration_override, threads);
    if (*val) return do_validate(config_path);
  } catch (const vspsfc::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", vspsfc::to_string(e.kind()), e.what());
    switch (e.kind()) {
      case vspsfc::ErrorKind::SimulationAbort:
      case vspsfc::ErrorKind::SpeedBoundViolation:
        return kExitSimAbort;
      default:
        return kExitValidation;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitOk;
}
