#pragma once

#include <string>
#include <vector>

#include "vspsfc/common.hpp"

namespace vspsfc {

struct AxisSpec {
  double min = 0.0;
  double max = 1.0;
  int count = 2;
};

/// Tabulated pump-turbine hill chart: mechanical power and efficiency over
/// (gate, rotor speed, head), plus an optimal-speed table over (power, head).
/// Lookups are multilinear on the stored grids; within a cell the surface is
/// exactly trilinear, so the partials returned by power() are the analytic
/// derivatives of the interpolant.
class HillChart {
 public:
  struct SyntheticSpec {
    double ridge_intercept = 0.80;  // best-efficiency speed at zero load
    double ridge_slope = 0.25;      // best-efficiency speed rise per pu load
    double eta_curvature = 2.0;     // quadratic efficiency drop away from the ridge
    AxisSpec gate_axis{0.0, 1.05, 22};
    AxisSpec speed_axis{0.75, 1.25, 21};
    AxisSpec head_axis{0.30, 1.40, 23};
    AxisSpec power_axis{0.0, 1.20, 25};
  };

  /// Builds chart tables by sampling the synthetic characteristic
  /// P_m = eta(G, w) * G * h^1.5 with eta peaking on a load-dependent ridge.
  static HillChart synthetic(const SyntheticSpec& spec);

  static HillChart from_grids(std::vector<double> gate_axis, std::vector<double> speed_axis,
                              std::vector<double> head_axis, std::vector<double> power_values,
                              std::vector<double> efficiency_values, std::vector<double> power_axis,
                              std::vector<double> head_axis_opt, std::vector<double> opt_speed_values);

  struct PowerEval {
    double p_m = 0.0;
    double efficiency = 0.0;
    double dp_dgate = 0.0;
    double dp_dspeed = 0.0;
    double dp_dhead = 0.0;
  };

  /// Trilinear power/efficiency lookup. Throws OutOfChart outside the hull
  /// unless clamp is set, in which case coordinates are clamped to the hull
  /// and the clamped_queries counter is bumped.
  PowerEval power(double gate, double speed, double head, bool clamp = false) const;

  /// Bilinear lookup on the optimal-speed table.
  double optimal_speed(double power, double head, bool clamp = false) const;

  /// Smallest gate with interpolated power >= p at (speed, head); bisection on
  /// the gate axis. Returns the gate-axis maximum when p is unreachable.
  double gate_for_power(double power, double speed, double head) const;

  bool in_hull(double gate, double speed, double head) const;
  bool in_opt_hull(double power, double head) const;

  const std::vector<double>& gate_axis() const { return gate_axis_; }
  const std::vector<double>& speed_axis() const { return speed_axis_; }
  const std::vector<double>& head_axis() const { return head_axis_; }
  const std::vector<double>& power_axis() const { return power_axis_; }
  const std::vector<double>& head_axis_opt() const { return head_axis_opt_; }
  const std::vector<double>& power_values() const { return power_values_; }
  const std::vector<double>& efficiency_values() const { return efficiency_values_; }
  const std::vector<double>& opt_speed_values() const { return opt_speed_values_; }

  long clamped_queries() const { return clamped_queries_; }

  /// Axis monotonicity and efficiency-range checks; throws ConfigInvalid.
  void validate() const;

 private:
  std::vector<double> gate_axis_, speed_axis_, head_axis_;
  std::vector<double> power_values_, efficiency_values_;  // [i_g][i_s][i_h] flattened
  std::vector<double> power_axis_, head_axis_opt_;
  std::vector<double> opt_speed_values_;  // [i_p][i_h] flattened
  mutable long clamped_queries_ = 0;

  std::size_t pidx(std::size_t ig, std::size_t is, std::size_t ih) const {
    return (ig * speed_axis_.size() + is) * head_axis_.size() + ih;
  }
};

std::vector<double> linspace(const AxisSpec& spec);

}  // namespace vspsfc
