#include "vspsfc/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

namespace vspsfc {

void PatternSearchConfig::validate() const {
  if (!(expansion > 1.0)) throw Error(ErrorKind::ConfigInvalid, "expansion multiple must exceed 1");
  if (!(contraction > 0.0 && contraction < 1.0))
    throw Error(ErrorKind::ConfigInvalid, "contraction multiple must be in (0, 1)");
  if (!(eps > 0.0 && initial_mesh > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "mesh sizes must be positive");
  if (k0.size() == 0) throw Error(ErrorKind::ConfigInvalid, "empty initial parameter vector");
  if (lower.size() != k0.size() || upper.size() != k0.size())
    throw Error(ErrorKind::DimensionMismatch, "bounds must match parameter dimension");
  if (!integer_mask.empty() && static_cast<Eigen::Index>(integer_mask.size()) != k0.size())
    throw Error(ErrorKind::DimensionMismatch, "integer mask must match parameter dimension");
  if (scale.size() != 0 && scale.size() != k0.size())
    throw Error(ErrorKind::DimensionMismatch, "scale must match parameter dimension");
  for (Eigen::Index i = 0; i < k0.size(); ++i) {
    if (!(lower(i) <= upper(i))) throw Error(ErrorKind::ConfigInvalid, "lower bound above upper bound");
    if (!(k0(i) >= lower(i) && k0(i) <= upper(i)))
      throw Error(ErrorKind::ConfigInvalid, "initial parameters must lie within bounds");
  }
}

namespace {

VectorXd snap(VectorXd k, const PatternSearchConfig& cfg) {
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    if (!cfg.integer_mask.empty() && cfg.integer_mask[static_cast<std::size_t>(i)])
      k(i) = std::round(k(i));
    k(i) = std::clamp(k(i), cfg.lower(i), cfg.upper(i));
    if (!cfg.integer_mask.empty() && cfg.integer_mask[static_cast<std::size_t>(i)]) {
      // nearest feasible integer after clamping
      double lo = std::ceil(cfg.lower(i));
      double hi = std::floor(cfg.upper(i));
      k(i) = std::clamp(std::round(k(i)), lo, hi);
    }
  }
  return k;
}

}  // namespace

VectorXd pattern_search(const PatternSearchConfig& cfg, const std::function<double(const VectorXd&)>& objective,
                        PatternSearchHistory* history) {
  cfg.validate();
  const Eigen::Index dim = cfg.k0.size();
  VectorXd scale = cfg.scale.size() ? cfg.scale : VectorXd::Ones(dim);

  VectorXd best = snap(cfg.k0, cfg);
  double f_best = objective(best);
  if (history) history->evaluated.push_back(best);
  if (!std::isfinite(f_best))
    throw Error(ErrorKind::NoFeasiblePoint, "objective not finite at the initial parameters");

  double mesh = cfg.initial_mesh;
  for (int iter = 0; iter < cfg.max_iterations && mesh >= cfg.eps; ++iter) {
    // fixed lexicographic poll order: +e_0, -e_0, +e_1, ...
    std::vector<VectorXd> poll;
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (double sign : {1.0, -1.0}) {
        double step = mesh * scale(i);
        if (!cfg.integer_mask.empty() && cfg.integer_mask[static_cast<std::size_t>(i)])
          step = std::max(std::round(step), 1.0);
        VectorXd cand = best;
        cand(i) += sign * step;
        cand = snap(cand, cfg);
        if ((cand - best).lpNorm<Eigen::Infinity>() > 0.0) poll.push_back(std::move(cand));
      }
    }

    std::vector<double> values(poll.size(), std::numeric_limits<double>::infinity());
    if (cfg.threads > 1 && poll.size() > 1) {
      std::vector<std::future<double>> futures;
      futures.reserve(poll.size());
      for (const auto& cand : poll)
        futures.push_back(std::async(std::launch::async, [&objective, cand] { return objective(cand); }));
      for (std::size_t i = 0; i < poll.size(); ++i) values[i] = futures[i].get();
    } else {
      for (std::size_t i = 0; i < poll.size(); ++i) values[i] = objective(poll[i]);
    }
    if (history)
      for (const auto& cand : poll) history->evaluated.push_back(cand);

    // gather-then-argmin; ties resolved by poll order
    int winner = -1;
    double f_winner = f_best;
    for (std::size_t i = 0; i < poll.size(); ++i) {
      if (values[i] < f_winner) {
        f_winner = values[i];
        winner = static_cast<int>(i);
      }
    }

    if (winner >= 0) {
      best = poll[static_cast<std::size_t>(winner)];
      f_best = f_winner;
      mesh *= cfg.expansion;
    } else {
      mesh *= cfg.contraction;
      if (history) ++history->contractions;
    }
    if (history) {
      history->best_objectives.push_back(f_best);
      ++history->iterations;
    }
  }
  return best;
}

ReferenceTargets candidate_references(const AmpcCandidateContext& ctx) {
  const SystemModel& model = *ctx.model;
  double s_pu_sum = 0.0;
  std::vector<std::pair<double, double>> ref_units_pu;
  for (const auto& [s, droop] : ctx.base.reference_units) {
    double s_pu = s / model.grid().params().s_base_mva;
    ref_units_pu.push_back({s_pu, droop});
    s_pu_sum += s_pu;
  }
  ReferenceTargets refs;
  refs.domega_pcc = reference_target(ref_units_pu, model.grid().params().f_sys, ctx.dp_imb / s_pu_sum);
  refs.omega_r = VectorXd::Zero(model.n_units());
  for (int i = 0; i < model.n_units(); ++i)
    refs.omega_r(i) = model.equilibrium_state()(model.idx().unit_omega(i));
  return refs;
}

double evaluate_candidate(const VectorXd& k, const AmpcCandidateContext& ctx) {
  const double inf = std::numeric_limits<double>::infinity();
  if (ctx.model == nullptr) throw Error(ErrorKind::ConfigInvalid, "candidate context has no model");
  const SystemModel& model = *ctx.model;
  const int n_units = model.n_units();
  if (k.size() != 2 + 1 + n_units)
    throw Error(ErrorKind::DimensionMismatch, "candidate vector must be [N, N_c, p_pcc, p_i...]");

  AmpcConfig cfg = ctx.base;
  cfg.prediction_horizon = static_cast<int>(std::llround(k(0)));
  cfg.control_horizon = static_cast<int>(std::llround(k(1)));
  cfg.weight_pcc = k(2);
  cfg.weight_rotor.assign(static_cast<std::size_t>(n_units), 0.0);
  for (int i = 0; i < n_units; ++i) cfg.weight_rotor[static_cast<std::size_t>(i)] = k(3 + i);

  if (cfg.prediction_horizon < 1 || cfg.control_horizon < 1 ||
      cfg.control_horizon > cfg.prediction_horizon)
    return inf;

  try {
    cfg.validate(n_units);
    // the model previews the sustained step through the affine drift term
    OperatingPoint op{model.equilibrium_state(), model.equilibrium_input(), -ctx.dp_imb};
    ContinuousJacobians jc = linearize_at(op, model);
    LinearModel lin = discretize(jc, cfg.dt_ctrl, op, model.measurement_matrix());
    ConstraintSet cs = build_constraint_set(op, model.plant().units, model.idx(), cfg.prediction_horizon,
                                            cfg.control_horizon, cfg.dt_ctrl, cfg.use_printed_dyn_gain);
    ReferenceTargets refs = candidate_references(ctx);
    QpBuild qb = build_qp(lin, cs, model.equilibrium_state(), refs, cfg, model.idx());
    QpSolution sol = solve_qp(qb.qp, qb.z_start);
    if (sol.status != QpStatus::Optimal) return inf;
    return sol.objective;
  } catch (const Error&) {
    return inf;
  }
}

}  // namespace vspsfc
