#include "vspsfc/scenario.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

namespace vspsfc {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t ScenarioConfig::hash() const { return fnv1a(canonical); }
std::uint64_t ScenarioConfig::hash_ex_controller() const { return fnv1a(canonical_ex_controller); }

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::ConfigInvalid, "at " + path + ": " + msg);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known) fail(path + "." + it.key(), "unknown key");
  }
}

const json& get(const json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double num(const json& j, const std::string& path, const char* key) {
  const json& v = get(j, path, key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double num_or(const json& j, const std::string& path, const char* key, double def) {
  if (!j.contains(key)) return def;
  return num(j, path, key);
}

int integer(const json& j, const std::string& path, const char* key, int def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<int>();
}

bool boolean(const json& j, const std::string& path, const char* key, bool def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::string str(const json& j, const std::string& path, const char* key) {
  const json& v = get(j, path, key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> num_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(path, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

AxisSpec axis_spec(const json& j, const std::string& path) {
  check_keys(j, path, {"min", "max", "count"});
  AxisSpec a;
  a.min = num(j, path, "min");
  a.max = num(j, path, "max");
  a.count = integer(j, path, "count", -1);
  if (a.count < 2) fail(path + ".count", "axis needs at least 2 samples");
  if (!(a.max > a.min)) fail(path, "axis max must exceed min");
  return a;
}

HillChart parse_chart(json& node, const std::string& path, const std::string& base_dir) {
  std::string type = str(node, path, "type");
  if (type == "synthetic") {
    check_keys(node, path,
               {"type", "ridge_intercept", "ridge_slope", "eta_curvature", "gate_axis", "speed_axis",
                "head_axis", "power_axis"});
    HillChart::SyntheticSpec spec;
    spec.ridge_intercept = num_or(node, path, "ridge_intercept", spec.ridge_intercept);
    spec.ridge_slope = num_or(node, path, "ridge_slope", spec.ridge_slope);
    spec.eta_curvature = num_or(node, path, "eta_curvature", spec.eta_curvature);
    if (node.contains("gate_axis")) spec.gate_axis = axis_spec(node.at("gate_axis"), path + ".gate_axis");
    if (node.contains("speed_axis")) spec.speed_axis = axis_spec(node.at("speed_axis"), path + ".speed_axis");
    if (node.contains("head_axis")) spec.head_axis = axis_spec(node.at("head_axis"), path + ".head_axis");
    if (node.contains("power_axis")) spec.power_axis = axis_spec(node.at("power_axis"), path + ".power_axis");
    try {
      return HillChart::synthetic(spec);
    } catch (const Error& e) {
      fail(path, e.what());
    }
  }
  if (type == "file" || type == "inline") {
    json grids;
    if (type == "file") {
      check_keys(node, path, {"type", "path"});
      std::filesystem::path p = str(node, path, "path");
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      std::ifstream in(p);
      if (!in) fail(path + ".path", "cannot open hill chart file " + p.string());
      try {
        in >> grids;
      } catch (const std::exception& e) {
        fail(path + ".path", std::string("hill chart file is not valid JSON: ") + e.what());
      }
      // inline the chart so the config hash covers the actual tables
      grids["type"] = "inline";
      node = grids;
    } else {
      grids = node;
    }
    check_keys(grids, path,
               {"type", "gate_axis", "speed_axis", "head_axis", "power_values", "efficiency_values",
                "power_axis", "head_axis_opt", "opt_speed_values"});
    try {
      return HillChart::from_grids(
          num_array(get(grids, path, "gate_axis"), path + ".gate_axis"),
          num_array(get(grids, path, "speed_axis"), path + ".speed_axis"),
          num_array(get(grids, path, "head_axis"), path + ".head_axis"),
          num_array(get(grids, path, "power_values"), path + ".power_values"),
          num_array(get(grids, path, "efficiency_values"), path + ".efficiency_values"),
          num_array(get(grids, path, "power_axis"), path + ".power_axis"),
          num_array(get(grids, path, "head_axis_opt"), path + ".head_axis_opt"),
          num_array(get(grids, path, "opt_speed_values"), path + ".opt_speed_values"));
    } catch (const Error& e) {
      fail(path, e.what());
    }
  }
  fail(path + ".type", "expected \"synthetic\", \"file\" or \"inline\"");
}

VspsUnitParams parse_unit(const json& j, const std::string& path) {
  check_keys(j, path,
             {"s_mva", "r_r", "l_s", "l_r", "l_m", "sigma", "i_r_rated", "i_s_rated", "u_r_rated", "r_ur",
              "h_inertia", "omega_r_min", "omega_r_max", "t_p", "t_g", "g_rate_max", "t_w", "friction"});
  VspsUnitParams u;
  u.s_mva = num(j, path, "s_mva");
  u.r_r = num(j, path, "r_r");
  u.l_s = num(j, path, "l_s");
  u.l_r = num(j, path, "l_r");
  u.l_m = num(j, path, "l_m");
  u.sigma = num(j, path, "sigma");
  u.i_r_rated = num(j, path, "i_r_rated");
  u.i_s_rated = num(j, path, "i_s_rated");
  u.u_r_rated = num(j, path, "u_r_rated");
  u.r_ur = num(j, path, "r_ur");
  u.h_inertia = num(j, path, "h_inertia");
  u.omega_r_min = num(j, path, "omega_r_min");
  u.omega_r_max = num(j, path, "omega_r_max");
  u.t_p = num(j, path, "t_p");
  u.t_g = num(j, path, "t_g");
  u.g_rate_max = num(j, path, "g_rate_max");
  u.t_w = num(j, path, "t_w");
  u.friction = num_or(j, path, "friction", 0.0);
  try {
    u.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return u;
}

bool near_multiple(double value, double quantum) {
  double r = value / quantum;
  return std::abs(r - std::llround(r)) < 1e-9;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  const std::string rp = "$";
  check_keys(root, rp, {"schema_version", "description", "grid", "plant", "controller", "disturbance", "sim"});
  int version = integer(root, rp, "schema_version", -1);
  if (version != 1) fail(rp + ".schema_version", "unsupported schema version (expected 1)");

  ScenarioConfig cfg;
  if (root.contains("description")) cfg.description = str(root, rp, "description");

  // grid
  {
    const json& g = get(root, rp, "grid");
    const std::string gp = rp + ".grid";
    check_keys(g, gp, {"h_sys", "d_sys", "f_sys", "s_base_mva", "sync_units", "battery"});
    cfg.grid.h_sys = num(g, gp, "h_sys");
    cfg.grid.d_sys = num(g, gp, "d_sys");
    cfg.grid.f_sys = num_or(g, gp, "f_sys", cfg.grid.d_sys);
    cfg.grid.s_base_mva = num_or(g, gp, "s_base_mva", 100.0);
    if (g.contains("sync_units")) {
      const json& su = g.at("sync_units");
      if (!su.is_array()) fail(gp + ".sync_units", "expected an array");
      int k = 0;
      for (const auto& e : su) {
        std::string up = gp + ".sync_units[" + std::to_string(k++) + "]";
        check_keys(e, up, {"s_mva", "droop", "t_gov", "t_turb", "hp_fraction"});
        SyncUnitParams s;
        s.s_mva = num(e, up, "s_mva");
        s.droop = num(e, up, "droop");
        s.t_gov = num(e, up, "t_gov");
        s.t_turb = num(e, up, "t_turb");
        s.hp_fraction = num_or(e, up, "hp_fraction", 0.3);
        cfg.grid.sync_units.push_back(s);
      }
    }
    if (g.contains("battery")) {
      const json& b = g.at("battery");
      const std::string bp = gp + ".battery";
      check_keys(b, bp, {"s_mva", "droop", "t_lag"});
      cfg.grid.battery.s_mva = num(b, bp, "s_mva");
      cfg.grid.battery.droop = num(b, bp, "droop");
      cfg.grid.battery.t_lag = num(b, bp, "t_lag");
    }
    try {
      cfg.grid.validate();
    } catch (const Error& e) {
      fail(gp, e.what());
    }
  }

  // plant
  json resolved = root;
  {
    json& p = resolved.at("plant");
    const std::string pp = rp + ".plant";
    check_keys(p, pp, {"units", "hill_chart", "tunnel", "dispatch"});
    const json& units = get(p, pp, "units");
    if (!units.is_array() || units.empty()) fail(pp + ".units", "expected a non-empty array");
    int k = 0;
    for (const auto& e : units)
      cfg.plant.units.push_back(parse_unit(e, pp + ".units[" + std::to_string(k++) + "]"));

    json& chart_node = p.at("hill_chart");
    if (!p.contains("hill_chart")) fail(pp + ".hill_chart", "missing required field");
    cfg.plant.chart = parse_chart(chart_node, pp + ".hill_chart", base_dir);

    const json& tn = get(p, pp, "tunnel");
    const std::string tp = pp + ".tunnel";
    check_keys(tn, tp, {"t_wc", "static_head"});
    cfg.plant.tunnel.t_wc = num_or(tn, tp, "t_wc", 0.0);
    cfg.plant.tunnel.static_head = num_or(tn, tp, "static_head", 1.0);
    if (cfg.plant.tunnel.t_wc < 0.0) fail(tp + ".t_wc", "must be non-negative");
    if (!(cfg.plant.tunnel.static_head > 0.0)) fail(tp + ".static_head", "must be positive");

    cfg.plant.p_set = num_array(get(p, pp, "dispatch"), pp + ".dispatch");
    if (cfg.plant.p_set.size() != cfg.plant.units.size())
      fail(pp + ".dispatch", "dispatch list must match the unit count");
    for (double ps : cfg.plant.p_set)
      if (!(ps > 0.0)) fail(pp + ".dispatch", "dispatch must be positive");
  }

  // sim (needed before controller for dt_ctrl)
  {
    const json& s = get(root, rp, "sim");
    const std::string sp = rp + ".sim";
    check_keys(s, sp, {"duration", "dt_truth", "dt_ctrl", "output_dt", "seed", "measurement_noise_std"});
    cfg.sim.duration = num(s, sp, "duration");
    cfg.sim.dt_truth = num_or(s, sp, "dt_truth", 0.001);
    cfg.sim.dt_ctrl = num_or(s, sp, "dt_ctrl", 0.1);
    cfg.sim.output_dt = num_or(s, sp, "output_dt", cfg.sim.dt_truth);
    cfg.sim.seed = static_cast<unsigned>(integer(s, sp, "seed", 1));
    cfg.sim.measurement_noise_std = num_or(s, sp, "measurement_noise_std", 0.0);
    if (!(cfg.sim.duration > 0.0)) fail(sp + ".duration", "must be positive");
    if (!(cfg.sim.dt_truth > 0.0 && cfg.sim.dt_truth <= 0.01))
      fail(sp + ".dt_truth", "must be positive and at most 10 ms");
    if (!near_multiple(cfg.sim.dt_ctrl, cfg.sim.dt_truth))
      fail(sp + ".dt_ctrl", "must be an integer multiple of dt_truth");
    if (!near_multiple(cfg.sim.output_dt, cfg.sim.dt_truth))
      fail(sp + ".output_dt", "must be an integer multiple of dt_truth");
    if (!near_multiple(cfg.sim.duration, cfg.sim.dt_truth))
      fail(sp + ".duration", "must be an integer multiple of dt_truth");
    if (cfg.sim.measurement_noise_std < 0.0) fail(sp + ".measurement_noise_std", "must be non-negative");
  }

  // controller
  {
    const json& c = get(root, rp, "controller");
    const std::string cp = rp + ".controller";
    cfg.controller.mode = str(c, cp, "mode");
    const std::string& mode = cfg.controller.mode;
    if (mode != "fsps" && mode != "vic" && mode != "ampc")
      fail(cp + ".mode", "expected \"fsps\", \"vic\" or \"ampc\"");
    if (mode == "ampc") {
      check_keys(c, cp, {"mode", "ampc"});
      const json& a = get(c, cp, "ampc");
      const std::string ap = cp + ".ampc";
      check_keys(a, ap,
                 {"prediction_horizon", "control_horizon", "weight_pcc", "weight_rotor", "input_penalty",
                  "slack_penalty", "objective_from_step_one", "use_printed_dyn_gain", "reference_units",
                  "imbalance_filter_time", "drift_filter_time"});
      auto& am = cfg.controller.ampc;
      am.prediction_horizon = integer(a, ap, "prediction_horizon", 30);
      am.control_horizon = integer(a, ap, "control_horizon", 5);
      am.weight_pcc = num_or(a, ap, "weight_pcc", 1.0);
      if (a.contains("weight_rotor"))
        am.weight_rotor = num_array(a.at("weight_rotor"), ap + ".weight_rotor");
      else
        am.weight_rotor.assign(cfg.plant.units.size(), 0.1);
      am.input_penalty = num_or(a, ap, "input_penalty", 1e-4);
      am.slack_penalty = num_or(a, ap, "slack_penalty", 1e6);
      am.objective_from_step_one = boolean(a, ap, "objective_from_step_one", false);
      am.use_printed_dyn_gain = boolean(a, ap, "use_printed_dyn_gain", false);
      am.imbalance_filter_time = num_or(a, ap, "imbalance_filter_time", 1.0);
      am.drift_filter_time = num_or(a, ap, "drift_filter_time", 0.4);
      am.dt_ctrl = cfg.sim.dt_ctrl;
      if (a.contains("reference_units")) {
        const json& ru = a.at("reference_units");
        if (!ru.is_array()) fail(ap + ".reference_units", "expected an array");
        int k = 0;
        for (const auto& e : ru) {
          std::string up = ap + ".reference_units[" + std::to_string(k++) + "]";
          check_keys(e, up, {"s_mva", "droop"});
          am.reference_units.push_back({num(e, up, "s_mva"), num(e, up, "droop")});
        }
      } else {
        for (const auto& su : cfg.grid.sync_units) am.reference_units.push_back({su.s_mva, su.droop});
        if (cfg.grid.battery.s_mva > 0.0)
          am.reference_units.push_back({cfg.grid.battery.s_mva, cfg.grid.battery.droop});
        for (const auto& un : cfg.plant.units) am.reference_units.push_back({un.s_mva, 0.04});
      }
      try {
        am.validate(static_cast<int>(cfg.plant.units.size()));
      } catch (const Error& e) {
        fail(ap, e.what());
      }
    } else if (mode == "vic") {
      check_keys(c, cp, {"mode", "vic"});
      const json& v = get(c, cp, "vic");
      const std::string vp = cp + ".vic";
      check_keys(v, vp, {"k_inertia", "k_droop", "washout_time", "gov_kp", "gov_ki"});
      auto& vc = cfg.controller.vic;
      vc.k_inertia = num(v, vp, "k_inertia");
      vc.k_droop = num(v, vp, "k_droop");
      vc.washout_time = num_or(v, vp, "washout_time", 0.1);
      vc.gov_kp = num_or(v, vp, "gov_kp", 1.5);
      vc.gov_ki = num_or(v, vp, "gov_ki", 0.4);
      try {
        vc.validate();
      } catch (const Error& e) {
        fail(vp, e.what());
      }
    } else {
      check_keys(c, cp, {"mode", "fsps"});
      const json& f = get(c, cp, "fsps");
      const std::string fp = cp + ".fsps";
      check_keys(f, fp, {"droop", "t_gov", "temp_droop", "reset_time"});
      cfg.controller.fsps.droop = num(f, fp, "droop");
      cfg.controller.fsps.t_gov = num_or(f, fp, "t_gov", 0.2);
      cfg.controller.fsps.temp_droop = num_or(f, fp, "temp_droop", 0.4);
      cfg.controller.fsps.reset_time = num_or(f, fp, "reset_time", 8.0);
      try {
        cfg.controller.fsps.validate();
      } catch (const Error& e) {
        fail(fp, e.what());
      }
    }
  }

  // disturbance
  {
    const json& d = get(root, rp, "disturbance");
    const std::string dp = rp + ".disturbance";
    if (!d.is_array()) fail(dp, "expected an array of events");
    int k = 0;
    for (const auto& e : d) {
      std::string ep = dp + "[" + std::to_string(k++) + "]";
      check_keys(e, ep, {"time", "delta_p_load"});
      DisturbanceEvent ev;
      ev.time = num(e, ep, "time");
      ev.delta_p_load = num(e, ep, "delta_p_load");
      if (ev.time < 0.0) fail(ep + ".time", "must be non-negative");
      if (!near_multiple(ev.time, cfg.sim.dt_truth))
        fail(ep + ".time", "must be an integer multiple of dt_truth");
      cfg.disturbance.events.push_back(ev);
    }
    try {
      cfg.disturbance.validate();
    } catch (const Error& e) {
      fail(dp, e.what());
    }
  }

  cfg.canonical = resolved.dump();
  json ex = resolved;
  ex.erase("controller");
  cfg.canonical_ex_controller = ex.dump();
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), std::filesystem::path(path).parent_path().string());
}

int ScenarioResult::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double> ScenarioResult::series(const std::string& name) const {
  int c = column(name);
  if (c < 0) throw Error(ErrorKind::EmptyTrace, "no column named " + name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct RunCounters {
  long rate_clamps = 0;
  long solver_failures = 0;
  double max_slack = 0.0;
  double max_est_error = 0.0;
};

void finalize_metrics(ScenarioResult& res, const ScenarioConfig& cfg, const RunCounters& rc) {
  res.metrics = nadir_metrics(res.series("time"), res.series("domega_pcc"));
  res.config_hash = cfg.hash();
  res.config_hash_ex_controller = cfg.hash_ex_controller();
  res.extra_metrics["rate_clamp_steps"] = static_cast<double>(rc.rate_clamps);
  res.extra_metrics["solver_failures"] = static_cast<double>(rc.solver_failures);
  res.extra_metrics["max_slack"] = rc.max_slack;
  res.extra_metrics["max_estimation_error"] = rc.max_est_error;
  for (std::size_t i = 0; i < cfg.plant.units.size(); ++i) {
    const auto& prm = cfg.plant.units[i];
    std::string sfx = "." + std::to_string(i + 1);
    auto max_of = [&](const std::string& col) {
      int c = res.column(col);
      if (c < 0) return 0.0;
      double m = 0.0;
      for (const auto& r : res.rows) m = std::max(m, r[static_cast<std::size_t>(c)]);
      return m;
    };
    if (res.column("i_r" + sfx) >= 0) {
      res.extra_metrics["max_i_r_ratio" + sfx] = max_of("i_r" + sfx) / prm.i_r_rated;
      res.extra_metrics["max_i_s_ratio" + sfx] = max_of("i_s" + sfx) / prm.i_s_rated;
      res.extra_metrics["max_u_r_ratio" + sfx] = max_of("u_r" + sfx) / prm.u_r_rated;
    }
    res.extra_metrics["max_g" + sfx] = max_of("g" + sfx);
  }
}

ScenarioResult run_vsps(const ScenarioConfig& cfg) {
  SystemModel sys(cfg.grid, cfg.plant);
  const auto& idx = sys.idx();
  const bool is_ampc = cfg.controller.mode == "ampc";

  std::optional<AmpcController> ampc;
  std::optional<VicController> vic;
  if (is_ampc)
    ampc.emplace(sys, cfg.controller.ampc);
  else
    vic.emplace(sys, cfg.controller.vic, cfg.sim.dt_ctrl);

  ScenarioResult res;
  res.mode = cfg.controller.mode;
  res.columns = {"time", "domega_pcc", "rocof", "p_gen_sync", "p_gen_batt", "p_gen_ps", "p_load_step"};
  for (int i = 0; i < sys.n_units(); ++i) {
    std::string s = "." + std::to_string(i + 1);
    for (const char* base : {"omega_r", "p_e", "p_m", "g", "q", "h", "i_r", "i_s", "u_r", "p_cmd", "g_cmd"})
      res.columns.push_back(base + s);
  }

  const double dt = cfg.sim.dt_truth;
  const long steps = std::llround(cfg.sim.duration / dt);
  const long ctrl_every = std::llround(cfg.sim.dt_ctrl / dt);
  const long rec_every = std::llround(cfg.sim.output_dt / dt);

  VectorXd x = sys.equilibrium_state();
  VectorXd u = sys.equilibrium_input();
  RunCounters rc;

  std::mt19937 rng(cfg.sim.seed);
  std::normal_distribution<double> dist(0.0, 1.0);

  auto record = [&](double t, double d_load) {
    std::vector<double> row;
    row.reserve(res.columns.size());
    double domega = x(idx.domega());
    row.push_back(t);
    row.push_back(domega);
    row.push_back(sys.frequency_derivative(x, d_load));
    double p_sync = 0.0;
    for (int j = 0; j < idx.n_sync; ++j)
      p_sync += x(idx.turb(j)) * cfg.grid.sync_units[static_cast<std::size_t>(j)].s_mva / cfg.grid.s_base_mva;
    row.push_back(p_sync);
    double p_batt = cfg.grid.battery.s_mva > 0.0 ? x(idx.batt()) * cfg.grid.battery.s_mva / cfg.grid.s_base_mva
                                                 : 0.0;
    row.push_back(p_batt);
    row.push_back(sys.external_injection(x));
    row.push_back(d_load);
    for (int i = 0; i < sys.n_units(); ++i) {
      VspsState st = sys.unit_state(x, i);
      const auto& prm = cfg.plant.units[static_cast<std::size_t>(i)];
      ExactLimits lim = exact_limits(st.p_e, 1.0 + domega, st.omega_r, prm);
      row.push_back(st.omega_r);
      row.push_back(st.p_e);
      row.push_back(st.p_m);
      row.push_back(st.g);
      row.push_back(st.q);
      row.push_back(st.h);
      row.push_back(lim.i_r);
      row.push_back(lim.i_s);
      row.push_back(lim.u_r);
      row.push_back(u(idx.iu_p(i)));
      row.push_back(u(idx.iu_g(i)));
    }
    res.rows.push_back(std::move(row));
  };

  for (long k = 0;; ++k) {
    double t = static_cast<double>(k) * dt;
    double d_load = cfg.disturbance.load_at(t);
    if (k % ctrl_every == 0) {
      VectorXd y = sys.measure(x);
      if (cfg.sim.measurement_noise_std > 0.0)
        for (Eigen::Index r = 0; r < y.size(); ++r) y(r) += cfg.sim.measurement_noise_std * dist(rng);
      if (is_ampc) {
        ControlOutput out = ampc->cycle(y);
        u = out.u_applied;
        if (out.latched) ++rc.solver_failures;
        rc.max_slack = std::max(rc.max_slack, out.max_slack);
        rc.max_est_error =
            std::max(rc.max_est_error, (sys.measure(ampc->estimate()) - sys.measure(x)).lpNorm<Eigen::Infinity>());
      } else {
        u = vic->cycle(y);
      }
    }
    if (k % rec_every == 0) record(t, d_load);
    if (k >= steps) break;
    try {
      TruthStepResult st = sys.truth_step(x, u, d_load, dt);
      if (st.rate_clamped) ++rc.rate_clamps;
      x = st.x;
    } catch (const Error& e) {
      throw Error(ErrorKind::SimulationAbort,
                  "simulation aborted at t=" + std::to_string(t) + ": " + e.what());
    }
  }

  finalize_metrics(res, cfg, rc);
  return res;
}

ScenarioResult run_fsps(const ScenarioConfig& cfg) {
  FspsModel sys(cfg.grid, cfg.plant, cfg.controller.fsps);
  const GridModel& grid = sys.grid();

  ScenarioResult res;
  res.mode = "fsps";
  res.columns = {"time", "domega_pcc", "rocof", "p_gen_sync", "p_gen_batt", "p_gen_ps", "p_load_step"};
  for (int i = 0; i < sys.n_units(); ++i) {
    std::string s = "." + std::to_string(i + 1);
    for (const char* base : {"omega_r", "p_e", "p_m", "g", "q", "h", "g_cmd"}) res.columns.push_back(base + s);
  }

  const double dt = cfg.sim.dt_truth;
  const long steps = std::llround(cfg.sim.duration / dt);
  const long rec_every = std::llround(cfg.sim.output_dt / dt);

  VectorXd x = sys.equilibrium_state();
  RunCounters rc;

  auto record = [&](double t, double d_load) {
    std::vector<double> row;
    double domega = x(grid.idx_domega());
    row.push_back(t);
    row.push_back(domega);
    row.push_back(sys.frequency_derivative(x, d_load));
    double p_sync = 0.0;
    for (std::size_t j = 0; j < cfg.grid.sync_units.size(); ++j)
      p_sync += x(grid.idx_turb(static_cast<int>(j))) * cfg.grid.sync_units[j].s_mva / cfg.grid.s_base_mva;
    row.push_back(p_sync);
    row.push_back(cfg.grid.battery.s_mva > 0.0
                      ? x(grid.idx_batt()) * cfg.grid.battery.s_mva / cfg.grid.s_base_mva
                      : 0.0);
    row.push_back(sys.external_injection(x));
    row.push_back(d_load);
    for (int i = 0; i < sys.n_units(); ++i) {
      double g = x(sys.idx_gate(i));
      double q = x(sys.idx_flow(i));
      row.push_back(1.0 + domega);
      row.push_back(sys.electrical_power(x, i, d_load));
      row.push_back(sys.mechanical_power(x, i));
      row.push_back(g);
      row.push_back(q);
      row.push_back(turbine_head(q, g));
      row.push_back(std::clamp(sys.equilibrium_state()(sys.idx_gate(i)) + x(sys.idx_gov(i)), 0.0, 1.0));
    }
    res.rows.push_back(std::move(row));
  };

  for (long k = 0;; ++k) {
    double t = static_cast<double>(k) * dt;
    double d_load = cfg.disturbance.load_at(t);
    if (k % rec_every == 0) record(t, d_load);
    if (k >= steps) break;
    try {
      TruthStepResult st = sys.fsps_plant_step(x, d_load, dt);
      if (st.rate_clamped) ++rc.rate_clamps;
      x = st.x;
    } catch (const Error& e) {
      throw Error(ErrorKind::SimulationAbort,
                  "simulation aborted at t=" + std::to_string(t) + ": " + e.what());
    }
  }

  finalize_metrics(res, cfg, rc);
  return res;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  if (cfg.controller.mode == "fsps") return run_fsps(cfg);
  return run_vsps(cfg);
}

std::string to_csv(const ScenarioResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.columns.size(); ++i) {
    out += result.columns[i];
    out += (i + 1 == result.columns.size()) ? '\n' : ',';
  }
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += fmt17(row[i]);
      out += (i + 1 == row.size()) ? '\n' : ',';
    }
  }
  return out;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json metrics_json(const ScenarioResult& r) {
  json m;
  m["mode"] = r.mode;
  m["config_hash"] = hex64(r.config_hash);
  m["config_hash_ex_controller"] = hex64(r.config_hash_ex_controller);
  m["nadir"] = r.metrics.nadir;
  m["t_nadir"] = r.metrics.t_nadir;
  m["rocof_max"] = r.metrics.rocof_max;
  m["settling_band_entry"] = r.metrics.settling_band_entry;
  for (const auto& [k, v] : r.extra_metrics) m[k] = v;
  return m;
}

}  // namespace

void write_result(const ScenarioResult& result, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);
  {
    std::ofstream f(dir / (result.mode + ".csv"));
    f << to_csv(result);
  }
  {
    std::ofstream f(dir / (result.mode + "_metrics.json"));
    f << metrics_json(result).dump(2) << "\n";
  }
}

ScenarioResult read_metrics(const std::string& metrics_path) {
  std::ifstream f(metrics_path);
  if (!f) throw Error(ErrorKind::ConfigInvalid, "cannot open " + metrics_path);
  json m;
  try {
    f >> m;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, metrics_path + " is not valid JSON: " + e.what());
  }
  ScenarioResult r;
  r.mode = m.at("mode").get<std::string>();
  r.config_hash = std::stoull(m.at("config_hash").get<std::string>(), nullptr, 16);
  r.config_hash_ex_controller = std::stoull(m.at("config_hash_ex_controller").get<std::string>(), nullptr, 16);
  r.metrics.nadir = m.at("nadir").get<double>();
  r.metrics.t_nadir = m.at("t_nadir").get<double>();
  r.metrics.rocof_max = m.at("rocof_max").get<double>();
  r.metrics.settling_band_entry = m.at("settling_band_entry").get<double>();
  for (auto it = m.begin(); it != m.end(); ++it) {
    if (it->is_number()) r.extra_metrics[it.key()] = it->get<double>();
  }
  return r;
}

ScenarioResult read_result(const std::string& csv_path, const std::string& metrics_path) {
  ScenarioResult r = read_metrics(metrics_path);
  std::ifstream f(csv_path);
  if (!f) throw Error(ErrorKind::ConfigInvalid, "cannot open " + csv_path);
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorKind::EmptyTrace, csv_path + " is empty");
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) r.columns.push_back(cell);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() != r.columns.size())
      throw Error(ErrorKind::ConfigInvalid, csv_path + ": ragged row");
    r.rows.push_back(std::move(row));
  }
  return r;
}

CompareReport compare_report(const std::vector<ScenarioResult>& results) {
  if (results.empty()) throw Error(ErrorKind::EmptyTrace, "no results to compare");
  for (const auto& r : results) {
    if (r.config_hash_ex_controller != results.front().config_hash_ex_controller)
      throw Error(ErrorKind::MismatchedScenarios,
                  "results were produced from different plant/grid configurations");
  }

  CompareReport rep;
  const ScenarioResult* fsps = nullptr;
  const ScenarioResult* vic = nullptr;
  const ScenarioResult* ampc = nullptr;
  for (const auto& r : results) {
    rep.entries.push_back({r.mode, r.metrics});
    if (r.mode == "fsps") fsps = &r;
    if (r.mode == "vic") vic = &r;
    if (r.mode == "ampc") ampc = &r;
  }
  auto improvement = [](double base, double other) {
    return (std::abs(base) - std::abs(other)) / std::abs(base) * 100.0;
  };
  if (fsps) {
    for (const auto& r : results)
      rep.improvement_vs_fsps[r.mode] = improvement(fsps->metrics.nadir, r.metrics.nadir);
  }
  if (vic && ampc) rep.ampc_vs_vic = improvement(vic->metrics.nadir, ampc->metrics.nadir);
  return rep;
}

std::string CompareReport::table() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-6s %12s %9s %12s %10s %14s\n", "mode", "nadir(pu)", "t_nadir",
                "rocof(pu/s)", "settling", "vs_fsps(%)");
  out += buf;
  for (const auto& e : entries) {
    double imp = improvement_vs_fsps.count(e.mode) ? improvement_vs_fsps.at(e.mode) : 0.0;
    std::snprintf(buf, sizeof(buf), "%-6s %12.6f %9.3f %12.6f %10.3f %14.2f\n", e.mode.c_str(),
                  e.metrics.nadir, e.metrics.t_nadir, e.metrics.rocof_max, e.metrics.settling_band_entry, imp);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "ampc vs vic improvement: %.2f%%\n", ampc_vs_vic);
  out += buf;
  return out;
}

std::string CompareReport::csv() const {
  std::string out = "mode,nadir,t_nadir,rocof_max,settling_band_entry,improvement_vs_fsps_pct\n";
  for (const auto& e : entries) {
    double imp = improvement_vs_fsps.count(e.mode) ? improvement_vs_fsps.at(e.mode) : 0.0;
    out += e.mode + "," + fmt17(e.metrics.nadir) + "," + fmt17(e.metrics.t_nadir) + "," +
           fmt17(e.metrics.rocof_max) + "," + fmt17(e.metrics.settling_band_entry) + "," + fmt17(imp) + "\n";
  }
  return out;
}

double max_limit_violation(const ScenarioResult& result, const ScenarioConfig& cfg) {
  double worst = 0.0;
  for (std::size_t i = 0; i < cfg.plant.units.size(); ++i) {
    const auto& prm = cfg.plant.units[i];
    std::string sfx = "." + std::to_string(i + 1);
    int ci_r = result.column("i_r" + sfx);
    int ci_s = result.column("i_s" + sfx);
    int cu_r = result.column("u_r" + sfx);
    int cw = result.column("omega_r" + sfx);
    for (const auto& row : result.rows) {
      if (ci_r >= 0) worst = std::max(worst, row[static_cast<std::size_t>(ci_r)] / prm.i_r_rated - 1.0);
      if (ci_s >= 0) worst = std::max(worst, row[static_cast<std::size_t>(ci_s)] / prm.i_s_rated - 1.0);
      if (cu_r >= 0) worst = std::max(worst, row[static_cast<std::size_t>(cu_r)] / prm.u_r_rated - 1.0);
      if (cw >= 0 && result.mode != "fsps") {
        double w = row[static_cast<std::size_t>(cw)];
        worst = std::max(worst, (prm.omega_r_min - w) / prm.omega_r_min);
        worst = std::max(worst, (w - prm.omega_r_max) / prm.omega_r_max);
      }
    }
  }
  return worst;
}

VicConfig tune_vic(const ScenarioConfig& scenario, double k_in_max, double k_dr_max,
                   const PatternSearchConfig* ps_overrides, PatternSearchHistory* history) {
  auto objective = [&](const VectorXd& k) {
    ScenarioConfig c = scenario;
    c.controller.mode = "vic";
    c.controller.vic.k_inertia = k(0);
    c.controller.vic.k_droop = k(1);
    try {
      ScenarioResult r = run_scenario(c);
      if (max_limit_violation(r, c) > 0.02) return std::numeric_limits<double>::infinity();
      return std::abs(r.metrics.nadir);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  PatternSearchConfig ps;
  if (ps_overrides) ps = *ps_overrides;
  if (ps.k0.size() == 0) {
    ps.k0 = VectorXd::Zero(2);
    ps.k0 << 0.25 * k_in_max, 0.25 * k_dr_max;
    ps.lower = VectorXd::Zero(2);
    ps.upper = VectorXd::Zero(2);
    ps.upper << k_in_max, k_dr_max;
    ps.scale = VectorXd::Zero(2);
    ps.scale << std::max(k_in_max / 4.0, 1e-6), std::max(k_dr_max / 4.0, 1e-6);
    ps.initial_mesh = 1.0;
    ps.eps = 0.02;
  }

  VectorXd k0 = ps.k0;
  if (!std::isfinite(objective(k0))) {
    // zero gains leave the plant at dispatch and are always feasible
    ps.k0 = VectorXd::Zero(2);
    if (!std::isfinite(objective(ps.k0)))
      throw Error(ErrorKind::NoFeasiblePoint, "no feasible VIC gains found");
  }

  VectorXd best = pattern_search(ps, objective, history);
  VicConfig out = scenario.controller.vic;
  out.k_inertia = best(0);
  out.k_droop = best(1);
  return out;
}

AmpcConfig tune_ampc_closed_loop(const ScenarioConfig& scenario, const PatternSearchConfig* ps_overrides,
                                 PatternSearchHistory* history) {
  const int n = static_cast<int>(scenario.plant.units.size());
  // log10 weights keep the poll steps multiplicative
  auto objective = [&](const VectorXd& k) {
    ScenarioConfig c = scenario;
    c.controller.mode = "ampc";
    c.controller.ampc.weight_pcc = std::pow(10.0, k(0));
    c.controller.ampc.weight_rotor.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) c.controller.ampc.weight_rotor[static_cast<std::size_t>(i)] = std::pow(10.0, k(1 + i));
    try {
      ScenarioResult r = run_scenario(c);
      if (max_limit_violation(r, c) > 0.02) return std::numeric_limits<double>::infinity();
      return std::abs(r.metrics.nadir);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  PatternSearchConfig ps;
  if (ps_overrides) ps = *ps_overrides;
  if (ps.k0.size() == 0) {
    ps.k0 = VectorXd::Zero(1 + n);
    ps.k0(0) = std::log10(std::max(scenario.controller.ampc.weight_pcc, 1e-3));
    for (int i = 0; i < n; ++i)
      ps.k0(1 + i) = std::log10(std::max(scenario.controller.ampc.weight_rotor.empty()
                                             ? 0.1
                                             : scenario.controller.ampc.weight_rotor[static_cast<std::size_t>(i)],
                                         1e-3));
    ps.lower = VectorXd::Constant(1 + n, -3.0);
    ps.upper = VectorXd::Constant(1 + n, 4.0);
    ps.initial_mesh = 1.0;
    ps.eps = 0.05;
  }

  VectorXd best = pattern_search(ps, objective, history);
  AmpcConfig out = scenario.controller.ampc;
  out.weight_pcc = std::pow(10.0, best(0));
  out.weight_rotor.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) out.weight_rotor[static_cast<std::size_t>(i)] = std::pow(10.0, best(1 + i));
  return out;
}

}  // namespace vspsfc
