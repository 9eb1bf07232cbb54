#pragma once

#include <functional>
#include <vector>

#include "vspsfc/ampc.hpp"
#include "vspsfc/common.hpp"

namespace vspsfc {

struct PatternSearchConfig {
  double expansion = 2.0;     // mesh multiplier on an improving poll
  double contraction = 0.5;   // mesh multiplier on a failed poll
  double eps = 1e-3;          // mesh-size convergence threshold
  double initial_mesh = 1.0;
  VectorXd k0;
  VectorXd lower, upper;
  std::vector<bool> integer_mask;  // empty means all-continuous
  VectorXd scale;                  // per-coordinate poll step scale; empty means ones
  int max_iterations = 10000;
  int threads = 1;

  void validate() const;
};

struct PatternSearchHistory {
  std::vector<double> best_objectives;  // best-so-far after each iteration
  std::vector<VectorXd> evaluated;      // every candidate actually evaluated
  int iterations = 0;
  int contractions = 0;
};

/// Generalized pattern search with coordinate poll directions. The full poll
/// set is evaluated (concurrently when threads > 1) and the winner picked by
/// gather-then-argmin in fixed poll order, so the result does not depend on
/// completion order. Integer coordinates poll with a step of at least one and
/// are rounded to the nearest in-bounds integer. Returns best-so-far when the
/// mesh falls below eps.
VectorXd pattern_search(const PatternSearchConfig& cfg, const std::function<double(const VectorXd&)>& objective,
                        PatternSearchHistory* history = nullptr);

/// Single-solve candidate evaluation for the controller-parameter search:
/// K = [N, N_c, p_pcc, p_1..p_n] builds a config, one full-horizon QP is
/// solved at the initial operating point against the reference step, and the
/// optimal objective value is returned (+inf for infeasible or failed
/// candidates).
struct AmpcCandidateContext {
  const SystemModel* model = nullptr;
  AmpcConfig base;
  double dp_imb = 0.0;  // signed imbalance driving the reference, system base
};

double evaluate_candidate(const VectorXd& k, const AmpcCandidateContext& ctx);

/// The reference targets evaluate_candidate solves against.
ReferenceTargets candidate_references(const AmpcCandidateContext& ctx);

}  // namespace vspsfc
