#pragma once

/// Goal-oriented C-optimal design: quantity-of-interest representers, the
/// goal-variance objective under the low-rank posterior, its weight gradient,
/// l1 sparsification, and bound-constrained minimization over [0,1]^q.

#include <functional>
#include <optional>

#include "oedsteer/rom.hpp"

namespace oedsteer {

struct QoiSpec {
  RegionRect region;
  double t_start = 0.0;  // t_start == t_end == 0 selects the initial-condition QoI
  double t_end = 0.0;
};

/// M-projected representer c of the goal functional: the QoI value of any
/// field m is <m, c>_M.
struct GoalVector {
  Vector c;
  QoiSpec qoi;
};

/// c = indicator of the region (initial-condition goal).
GoalVector goal_vector_initial(const RegionRect& region, const Grid& grid);

/// Space-time goal: integral of the transported state over region x window,
/// realized by the exact transpose of the time stepping with a volumetric
/// source on the window. Satisfies sum_k dt <u_k, chi>_M = <m, c>_M.
GoalVector goal_vector_spacetime(const QoiSpec& qoi, const TransportOperator& transport);

/// Forward evaluation of the space-time QoI for adjoint-consistency checks.
double spacetime_qoi_value(const ScalarField& m, const QoiSpec& qoi,
                           const TransportOperator& transport);

/// Assignment of design weights to measurement slots: weight s multiplies all
/// measurements in slots[s]; `base` holds fixed (non-optimized) weights.
struct WeightPattern {
  std::vector<std::vector<Index>> slots;
  Vector base;  // expanded size; empty means zero

  Index numWeights() const { return static_cast<Index>(slots.size()); }
  Vector expand(const Vector& w, Index num_measurements) const;
};

WeightPattern weight_pattern(const CandidateSet& cs);

struct DesignProblem {
  const CandidateSet* candidates = nullptr;
  GoalVector goal;
  double alpha = 0.1;
  double sigma = 0.005;
  Index rank = 50;
  double threshold = 0.5;
};

/// Evaluator of  w -> c' M H(w)^{-1} c  (+ alpha ||w||_1) and its gradient.
/// Two backends: the full transport operators (a randomized generalized
/// eigensolve per evaluation) or a preconditioned ROM (dense r x r work per
/// evaluation).
class TraceEvaluator {
 public:
  /// Full-operator backend.
  TraceEvaluator(const DesignProblem& dp, const ForwardMap& fwd, const BiLaplacianPrior& prior,
                 WeightPattern pattern, const LowRankOptions& opts = {});
  /// ROM backend (rom must be preconditioned).
  TraceEvaluator(const DesignProblem& dp, const RomOperator& rom, const BiLaplacianPrior& prior,
                 WeightPattern pattern);

  Index numWeights() const { return pattern_.numWeights(); }
  /// Goal variance under the prior alone, <c, Gamma_pr c>_M.
  double priorGoalVariance() const { return prior_goal_variance_; }

  /// Data term c' M H(w)^{-1} c (no regularizer).
  double dataTerm(const Vector& w) const;
  /// dataTerm + alpha ||w||_1.
  double objective(const Vector& w) const;
  /// Gradient of objective (data gradient is -sigma^{-2} (F q)_j^2 summed per
  /// weight slot, plus alpha on each coordinate).
  Vector gradient(const Vector& w) const;
  void evaluate(const Vector& w, double* f, Vector* g) const;

  /// Low-rank posterior for the given design (ROM backend reconstructs the
  /// eigenpairs from the dense reduced problem).
  LowRankPosterior posterior(const Vector& w) const;

 private:
  void evalRom(const Vector& w, double* f, Vector* g) const;
  void evalFull(const Vector& w, double* f, Vector* g) const;
  Matrix reducedGram(const Vector& w_expanded) const;

  DesignProblem dp_;
  const ForwardMap* fwd_ = nullptr;
  const BiLaplacianPrior* prior_ = nullptr;
  const RomOperator* rom_ = nullptr;
  WeightPattern pattern_;
  LowRankOptions lowrank_opts_;
  double prior_goal_variance_ = 0.0;

  // ROM backend caches.
  Vector ghat_;                 // U' M A^{-1} M c
  Vector chat_;                 // A^{-1} M c
  std::vector<Matrix> grams_;   // per weight slot: sigma^{-2} S V_slot' V_slot S
  Matrix base_gram_;            // contribution of the fixed base weights
};

struct OptimizeOptions {
  int maxiter = 500;
  double pg_tol = 1e-6;  // stop when ||projected gradient||_inf <= pg_tol * (1 + |f|)
  int memory = 10;
  int max_linesearch = 40;
};

struct OptimizeResult {
  Vector w;
  std::vector<double> history;  // objective per accepted iterate, non-increasing
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Projected limited-memory BFGS on the box [0,1]^q.
OptimizeResult minimize_box(const std::function<void(const Vector&, double*, Vector*)>& eval,
                            const Vector& w0, const OptimizeOptions& opts = {});

OptimizeResult optimize_design(const TraceEvaluator& evaluator, const Vector& w0,
                               const OptimizeOptions& opts = {});

/// w_i >= threshold -> 1, else 0.
DesignWeights threshold_design(const DesignWeights& w, double threshold);

}  // namespace oedsteer
