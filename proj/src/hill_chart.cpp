#include "vspsfc/hill_chart.hpp"

#include <algorithm>
#include <cmath>

namespace vspsfc {

std::vector<double> linspace(const AxisSpec& spec) {
  std::vector<double> v(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    v[static_cast<std::size_t>(i)] =
        spec.min + (spec.max - spec.min) * static_cast<double>(i) / static_cast<double>(spec.count - 1);
  }
  return v;
}

namespace {

// Index of the cell containing x, in [0, axis.size()-2]; x assumed in hull.
std::size_t cell_of(const std::vector<double>& axis, double x) {
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t i = static_cast<std::size_t>(std::distance(axis.begin(), it));
  if (i == 0) return 0;
  if (i >= axis.size()) return axis.size() - 2;
  return i - 1;
}

double clamp_to(const std::vector<double>& axis, double x) {
  return std::min(std::max(x, axis.front()), axis.back());
}

}  // namespace

HillChart HillChart::synthetic(const SyntheticSpec& spec) {
  HillChart c;
  c.gate_axis_ = linspace(spec.gate_axis);
  c.speed_axis_ = linspace(spec.speed_axis);
  c.head_axis_ = linspace(spec.head_axis);
  c.power_axis_ = linspace(spec.power_axis);
  c.head_axis_opt_ = linspace(spec.head_axis);

  const auto ridge = [&](double g) { return spec.ridge_intercept + spec.ridge_slope * g; };
  const auto eta = [&](double g, double w) {
    double dev = w - ridge(g);
    return 1.0 - spec.eta_curvature * dev * dev;
  };

  c.power_values_.resize(c.gate_axis_.size() * c.speed_axis_.size() * c.head_axis_.size());
  c.efficiency_values_.resize(c.power_values_.size());
  for (std::size_t ig = 0; ig < c.gate_axis_.size(); ++ig) {
    for (std::size_t is = 0; is < c.speed_axis_.size(); ++is) {
      for (std::size_t ih = 0; ih < c.head_axis_.size(); ++ih) {
        double g = c.gate_axis_[ig];
        double w = c.speed_axis_[is];
        double h = c.head_axis_[ih];
        double e = eta(g, w);
        c.efficiency_values_[c.pidx(ig, is, ih)] = e;
        c.power_values_[c.pidx(ig, is, ih)] = e * g * std::pow(h, 1.5);
      }
    }
  }

  // Best-efficiency speed for a load request: gate that delivers the power on
  // the ridge (eta = 1 there), then the ridge speed at that gate.
  c.opt_speed_values_.resize(c.power_axis_.size() * c.head_axis_opt_.size());
  for (std::size_t ip = 0; ip < c.power_axis_.size(); ++ip) {
    for (std::size_t ih = 0; ih < c.head_axis_opt_.size(); ++ih) {
      double p = c.power_axis_[ip];
      double h = c.head_axis_opt_[ih];
      double g = std::min(p / std::pow(h, 1.5), c.gate_axis_.back());
      double w = ridge(g);
      w = std::min(std::max(w, c.speed_axis_.front()), c.speed_axis_.back());
      c.opt_speed_values_[ip * c.head_axis_opt_.size() + ih] = w;
    }
  }

  c.validate();
  return c;
}

HillChart HillChart::from_grids(std::vector<double> gate_axis, std::vector<double> speed_axis,
                                std::vector<double> head_axis, std::vector<double> power_values,
                                std::vector<double> efficiency_values, std::vector<double> power_axis,
                                std::vector<double> head_axis_opt, std::vector<double> opt_speed_values) {
  HillChart c;
  c.gate_axis_ = std::move(gate_axis);
  c.speed_axis_ = std::move(speed_axis);
  c.head_axis_ = std::move(head_axis);
  c.power_values_ = std::move(power_values);
  c.efficiency_values_ = std::move(efficiency_values);
  c.power_axis_ = std::move(power_axis);
  c.head_axis_opt_ = std::move(head_axis_opt);
  c.opt_speed_values_ = std::move(opt_speed_values);
  c.validate();
  return c;
}

void HillChart::validate() const {
  auto check_axis = [](const std::vector<double>& a, const char* name) {
    if (a.size() < 2) throw Error(ErrorKind::ConfigInvalid, std::string("hill chart axis too short: ") + name);
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (!(a[i] > a[i - 1]))
        throw Error(ErrorKind::ConfigInvalid, std::string("hill chart axis not strictly increasing: ") + name);
    }
  };
  check_axis(gate_axis_, "gate");
  check_axis(speed_axis_, "speed");
  check_axis(head_axis_, "head");
  check_axis(power_axis_, "power");
  check_axis(head_axis_opt_, "head(opt)");
  if (power_values_.size() != gate_axis_.size() * speed_axis_.size() * head_axis_.size() ||
      efficiency_values_.size() != power_values_.size())
    throw Error(ErrorKind::ConfigInvalid, "hill chart value grid size mismatch");
  if (opt_speed_values_.size() != power_axis_.size() * head_axis_opt_.size())
    throw Error(ErrorKind::ConfigInvalid, "optimal-speed table size mismatch");
  for (double e : efficiency_values_) {
    if (!(e > 0.0 && e <= 1.0)) throw Error(ErrorKind::ConfigInvalid, "hill chart efficiency outside (0, 1]");
  }
}

bool HillChart::in_hull(double gate, double speed, double head) const {
  return gate >= gate_axis_.front() && gate <= gate_axis_.back() && speed >= speed_axis_.front() &&
         speed <= speed_axis_.back() && head >= head_axis_.front() && head <= head_axis_.back();
}

bool HillChart::in_opt_hull(double power, double head) const {
  return power >= power_axis_.front() && power <= power_axis_.back() && head >= head_axis_opt_.front() &&
         head <= head_axis_opt_.back();
}

HillChart::PowerEval HillChart::power(double gate, double speed, double head, bool clamp) const {
  if (!in_hull(gate, speed, head)) {
    if (!clamp)
      throw Error(ErrorKind::OutOfChart, "hill chart query outside hull: gate=" + std::to_string(gate) +
                                             " speed=" + std::to_string(speed) + " head=" + std::to_string(head));
    gate = clamp_to(gate_axis_, gate);
    speed = clamp_to(speed_axis_, speed);
    head = clamp_to(head_axis_, head);
    ++clamped_queries_;
  }
  std::size_t ig = cell_of(gate_axis_, gate);
  std::size_t is = cell_of(speed_axis_, speed);
  std::size_t ih = cell_of(head_axis_, head);
  double dg = gate_axis_[ig + 1] - gate_axis_[ig];
  double ds = speed_axis_[is + 1] - speed_axis_[is];
  double dh = head_axis_[ih + 1] - head_axis_[ih];
  double tg = (gate - gate_axis_[ig]) / dg;
  double ts = (speed - speed_axis_[is]) / ds;
  double th = (head - head_axis_[ih]) / dh;

  auto tri = [&](const std::vector<double>& v, double& d_g, double& d_s, double& d_h) {
    double c000 = v[pidx(ig, is, ih)], c001 = v[pidx(ig, is, ih + 1)];
    double c010 = v[pidx(ig, is + 1, ih)], c011 = v[pidx(ig, is + 1, ih + 1)];
    double c100 = v[pidx(ig + 1, is, ih)], c101 = v[pidx(ig + 1, is, ih + 1)];
    double c110 = v[pidx(ig + 1, is + 1, ih)], c111 = v[pidx(ig + 1, is + 1, ih + 1)];
    double c00 = c000 + (c100 - c000) * tg, c01 = c001 + (c101 - c001) * tg;
    double c10 = c010 + (c110 - c010) * tg, c11 = c011 + (c111 - c011) * tg;
    double c0 = c00 + (c10 - c00) * ts, c1 = c01 + (c11 - c01) * ts;
    // d/dgate at fixed (ts, th)
    double g00 = (c100 - c000), g01 = (c101 - c001), g10 = (c110 - c010), g11 = (c111 - c011);
    double g0 = g00 + (g10 - g00) * ts, g1 = g01 + (g11 - g01) * ts;
    d_g = (g0 + (g1 - g0) * th) / dg;
    double s0 = (c10 - c00), s1 = (c11 - c01);
    d_s = (s0 + (s1 - s0) * th) / ds;
    d_h = (c1 - c0) / dh;
    return c0 + (c1 - c0) * th;
  };

  PowerEval out;
  out.p_m = tri(power_values_, out.dp_dgate, out.dp_dspeed, out.dp_dhead);
  double eg, es, eh;
  out.efficiency = tri(efficiency_values_, eg, es, eh);
  return out;
}

double HillChart::optimal_speed(double power, double head, bool clamp) const {
  if (!in_opt_hull(power, head)) {
    if (!clamp)
      throw Error(ErrorKind::OutOfChart, "optimal-speed query outside hull: power=" + std::to_string(power) +
                                             " head=" + std::to_string(head));
    power = clamp_to(power_axis_, power);
    head = clamp_to(head_axis_opt_, head);
    ++clamped_queries_;
  }
  std::size_t ip = cell_of(power_axis_, power);
  std::size_t ih = cell_of(head_axis_opt_, head);
  double tp = (power - power_axis_[ip]) / (power_axis_[ip + 1] - power_axis_[ip]);
  double th = (head - head_axis_opt_[ih]) / (head_axis_opt_[ih + 1] - head_axis_opt_[ih]);
  std::size_t nh = head_axis_opt_.size();
  double c00 = opt_speed_values_[ip * nh + ih], c01 = opt_speed_values_[ip * nh + ih + 1];
  double c10 = opt_speed_values_[(ip + 1) * nh + ih], c11 = opt_speed_values_[(ip + 1) * nh + ih + 1];
  double c0 = c00 + (c10 - c00) * tp, c1 = c01 + (c11 - c01) * tp;
  return c0 + (c1 - c0) * th;
}

double HillChart::gate_for_power(double power, double speed, double head) const {
  double lo = gate_axis_.front();
  double hi = gate_axis_.back();
  if (power <= this->power(lo, speed, head, true).p_m) return lo;
  if (power >= this->power(hi, speed, head, true).p_m) return hi;
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    if (this->power(mid, speed, head, true).p_m < power)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace vspsfc
