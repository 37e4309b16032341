#include "oedsteer/oed.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <deque>

namespace oedsteer {

GoalVector goal_vector_initial(const RegionRect& region, const Grid& grid) {
  GoalVector g;
  g.c = region_indicator(grid, region).values;
  g.qoi = QoiSpec{region, 0.0, 0.0};
  return g;
}

namespace {

// Time steps contributing to the window: t_k in (t_start, t_end], k >= 1,
// matching the implicit-Euler reading of each step as covering (t_{k-1}, t_k].
std::vector<int> window_steps(const QoiSpec& qoi, const TransportConfig& cfg, int n_steps) {
  std::vector<int> steps;
  const double tol = 1e-9 * std::max(1.0, cfg.T);
  for (int k = 1; k <= n_steps; ++k) {
    const double t = k * cfg.dt;
    if (t > qoi.t_start + tol && t <= qoi.t_end + tol) steps.push_back(k);
  }
  return steps;
}

}  // namespace

GoalVector goal_vector_spacetime(const QoiSpec& qoi, const TransportOperator& transport) {
  const Grid& grid = transport.grid();
  require(qoi.t_start >= 0.0 && qoi.t_start <= qoi.t_end && qoi.t_end <= transport.config().T,
          "goal_vector_spacetime: window must satisfy 0 <= t_start <= t_end <= T");
  GoalVector g;
  g.qoi = qoi;
  if (qoi.t_start == 0.0 && qoi.t_end == 0.0) {
    g.c = region_indicator(grid, qoi.region).values;
    return g;
  }
  const Vector chi = region_indicator(grid, qoi.region).values;
  const Vector mass = grid.massDiag();
  const auto steps = window_steps(qoi, transport.config(), transport.numSteps());
  if (steps.empty()) {
    g.c = Vector::Zero(grid.numActive());
    return g;
  }
  const double dt = transport.config().dt;
  Vector acc = Vector::Zero(grid.numActive());
  size_t next = steps.size();
  for (int k = steps.back(); k >= 1; --k) {
    if (next > 0 && steps[next - 1] == k) {
      acc += dt * mass.cwiseProduct(chi);
      --next;
    }
    acc = transport.stepTranspose(acc);
  }
  g.c = acc.cwiseQuotient(mass);
  return g;
}

double spacetime_qoi_value(const ScalarField& m, const QoiSpec& qoi,
                           const TransportOperator& transport) {
  const Grid& grid = transport.grid();
  const Vector chi = region_indicator(grid, qoi.region).values;
  const Vector mass = grid.massDiag();
  const auto steps = window_steps(qoi, transport.config(), transport.numSteps());
  if (steps.empty()) return 0.0;
  const double dt = transport.config().dt;
  double value = 0.0;
  Vector u = m.values;
  size_t next = 0;
  for (int k = 1; k <= steps.back(); ++k) {
    u = transport.stepForward(u);
    if (next < steps.size() && steps[next] == k) {
      value += dt * chi.dot(mass.cwiseProduct(u));
      ++next;
    }
  }
  return value;
}

Vector WeightPattern::expand(const Vector& w, Index num_measurements) const {
  require(w.size() == numWeights(), "WeightPattern::expand: weight size mismatch");
  Vector out = base.size() ? base : Vector::Zero(num_measurements);
  require(out.size() == num_measurements, "WeightPattern::expand: base size mismatch");
  for (Index s = 0; s < numWeights(); ++s)
    for (Index j : slots[static_cast<size_t>(s)]) out(j) += w(s);
  return out;
}

WeightPattern weight_pattern(const CandidateSet& cs) {
  WeightPattern p;
  p.slots.resize(static_cast<size_t>(cs.numWeights()));
  if (cs.mode() == DesignMode::StationaryGrid) {
    for (Index k = 0; k < cs.numTimes(); ++k)
      for (Index s = 0; s < cs.numPositions(); ++s)
        p.slots[static_cast<size_t>(s)].push_back(cs.measurementIndex(k, s));
  } else {
    for (Index j = 0; j < cs.numMeasurements(); ++j) p.slots[static_cast<size_t>(j)].push_back(j);
  }
  return p;
}

TraceEvaluator::TraceEvaluator(const DesignProblem& dp, const ForwardMap& fwd,
                               const BiLaplacianPrior& prior, WeightPattern pattern,
                               const LowRankOptions& opts)
    : dp_(dp), fwd_(&fwd), prior_(&prior), pattern_(std::move(pattern)), lowrank_opts_(opts) {
  require(dp_.goal.c.size() == prior.grid().numActive(), "TraceEvaluator: goal size mismatch");
  const Vector mc = prior.massDiag().cwiseProduct(dp_.goal.c);
  prior_goal_variance_ = mc.dot(prior.applyCovariance(dp_.goal.c));
}

TraceEvaluator::TraceEvaluator(const DesignProblem& dp, const RomOperator& rom,
                               const BiLaplacianPrior& prior, WeightPattern pattern)
    : dp_(dp), prior_(&prior), rom_(&rom), pattern_(std::move(pattern)) {
  require(rom.preconditioned, "TraceEvaluator: ROM backend needs the preconditioned ROM");
  require(dp_.goal.c.size() == prior.grid().numActive(), "TraceEvaluator: goal size mismatch");
  const Vector& mass = prior.massDiag();
  chat_ = prior.solveA(mass.cwiseProduct(dp_.goal.c));
  ghat_ = rom.U.transpose() * mass.cwiseProduct(chat_);
  prior_goal_variance_ = chat_.dot(mass.cwiseProduct(chat_));

  const Index q = rom.numMeasurements();
  const Index r = rom.rank();
  const double inv_s2 = 1.0 / (dp_.sigma * dp_.sigma);

  if (pattern_.base.size()) {
    base_gram_ = Matrix::Zero(r, r);
    for (Index j = 0; j < q; ++j)
      if (pattern_.base(j) != 0.0) {
        const Vector row = rom.S.cwiseProduct(rom.V.row(j).transpose());
        base_gram_.noalias() += (inv_s2 * pattern_.base(j)) * row * row.transpose();
      }
  }

  // Per-slot reduced Gram matrices make each evaluation O(num_weights * r^2);
  // skipped when the cache would be large (the direct q*r^2 product is used).
  const double cache_bytes =
      static_cast<double>(pattern_.numWeights()) * static_cast<double>(r) * r * 8.0;
  if (cache_bytes <= 512.0 * 1024 * 1024) {
    grams_.reserve(static_cast<size_t>(pattern_.numWeights()));
    for (Index s = 0; s < pattern_.numWeights(); ++s) {
      const auto& slot = pattern_.slots[static_cast<size_t>(s)];
      Matrix B(static_cast<Index>(slot.size()), r);
      for (size_t i = 0; i < slot.size(); ++i)
        B.row(static_cast<Index>(i)) = rom.S.cwiseProduct(rom.V.row(slot[i]).transpose());
      grams_.push_back(inv_s2 * B.transpose() * B);
    }
  }
}

Matrix TraceEvaluator::reducedGram(const Vector& w_expanded) const {
  const Index r = rom_->rank();
  const double inv_s2 = 1.0 / (dp_.sigma * dp_.sigma);
  Matrix VS = rom_->V * rom_->S.asDiagonal();
  Matrix T = inv_s2 * VS.transpose() * w_expanded.asDiagonal() * VS;
  return 0.5 * (T + T.transpose());
}

void TraceEvaluator::evalRom(const Vector& w, double* f, Vector* g) const {
  const Index r = rom_->rank();
  Matrix T;
  if (!grams_.empty()) {
    T = base_gram_.size() ? base_gram_ : Matrix::Zero(r, r);
    for (Index s = 0; s < w.size(); ++s)
      if (w(s) != 0.0) T.noalias() += w(s) * grams_[static_cast<size_t>(s)];
  } else {
    T = reducedGram(pattern_.expand(w, rom_->numMeasurements()));
  }
  Eigen::LLT<Matrix> llt(Matrix::Identity(r, r) + T);
  require(llt.info() == Eigen::Success, "TraceEvaluator: reduced system not SPD");
  const Vector z = llt.solve(ghat_);
  const double data = prior_goal_variance_ - ghat_.dot(ghat_) + ghat_.dot(z);
  if (f) *f = data + dp_.alpha * w.sum();
  if (g) {
    g->resize(w.size());
    const double inv_s2 = 1.0 / (dp_.sigma * dp_.sigma);
    const Vector sz = rom_->S.cwiseProduct(z);
    for (Index s = 0; s < w.size(); ++s) {
      double acc = 0.0;
      for (Index j : pattern_.slots[static_cast<size_t>(s)]) {
        const double fq = rom_->V.row(j).dot(sz);
        acc += fq * fq;
      }
      (*g)(s) = -inv_s2 * acc + dp_.alpha;
    }
  }
}

void TraceEvaluator::evalFull(const Vector& w, double* f, Vector* g) const {
  const Index n = fwd_->cols();
  const Vector w_exp = pattern_.expand(w, fwd_->rows());
  const Vector mc = prior_->massDiag().cwiseProduct(dp_.goal.c);

  Vector q_vec;
  if (dp_.rank == 0 || w_exp.maxCoeff() <= 0.0) {
    q_vec = prior_->applyCovariance(dp_.goal.c);
  } else {
    LinearMap G = misfit_action_map(*fwd_, w_exp, dp_.sigma);
    GenEigOptions go;
    go.oversample = lowrank_opts_.oversample;
    go.power_iters = lowrank_opts_.power_iters;
    go.seed = lowrank_opts_.seed;
    EigenPairs pairs = randomized_gen_eig(G, prior_->metricR(), std::min(dp_.rank, n), go);
    Index keep = 0;
    while (keep < pairs.rank() && pairs.values(keep) >= lowrank_opts_.eigen_floor) ++keep;
    q_vec = prior_->applyCovariance(dp_.goal.c);
    if (keep > 0) {
      const Matrix V = pairs.vectors.leftCols(keep);
      const Vector d = pairs.values.head(keep).array() / (1.0 + pairs.values.head(keep).array());
      q_vec.noalias() -= V * d.cwiseProduct(V.transpose() * mc);
    }
  }
  if (f) *f = mc.dot(q_vec) + dp_.alpha * w.sum();
  if (g) {
    const Vector fq = fwd_->apply(q_vec);
    const double inv_s2 = 1.0 / (dp_.sigma * dp_.sigma);
    g->resize(w.size());
    for (Index s = 0; s < w.size(); ++s) {
      double acc = 0.0;
      for (Index j : pattern_.slots[static_cast<size_t>(s)]) acc += fq(j) * fq(j);
      (*g)(s) = -inv_s2 * acc + dp_.alpha;
    }
  }
}

void TraceEvaluator::evaluate(const Vector& w, double* f, Vector* g) const {
  require(w.size() == pattern_.numWeights(), "TraceEvaluator: weight size mismatch");
  if (rom_) evalRom(w, f, g);
  else evalFull(w, f, g);
}

double TraceEvaluator::dataTerm(const Vector& w) const {
  double f = 0.0;
  evaluate(w, &f, nullptr);
  return f - dp_.alpha * w.sum();
}

double TraceEvaluator::objective(const Vector& w) const {
  double f = 0.0;
  evaluate(w, &f, nullptr);
  return f;
}

Vector TraceEvaluator::gradient(const Vector& w) const {
  Vector g;
  evaluate(w, nullptr, &g);
  return g;
}

LowRankPosterior TraceEvaluator::posterior(const Vector& w) const {
  require(w.size() == pattern_.numWeights(), "TraceEvaluator: weight size mismatch");
  const double floor = 1e-10;
  if (rom_) {
    const Index r = rom_->rank();
    Matrix T;
    if (!grams_.empty()) {
      T = base_gram_.size() ? base_gram_ : Matrix::Zero(r, r);
      for (Index s = 0; s < w.size(); ++s)
        if (w(s) != 0.0) T.noalias() += w(s) * grams_[static_cast<size_t>(s)];
    } else {
      T = reducedGram(pattern_.expand(w, rom_->numMeasurements()));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(T);
    Index keep = 0;
    for (Index i = r - 1; i >= 0; --i)
      if (eig.eigenvalues()(i) >= floor) ++keep;
    Vector values(keep);
    Matrix E(r, keep);
    for (Index i = 0; i < keep; ++i) {
      values(i) = eig.eigenvalues()(r - 1 - i);
      E.col(i) = eig.eigenvectors().col(r - 1 - i);
    }
    Matrix scaled = rom_->U * E;
    scaled.array().colwise() *= prior_->massDiag().array();
    Matrix V = prior_->solveA(scaled);
    return LowRankPosterior(*prior_, std::move(values), std::move(V), w);
  }
  const Vector w_exp = pattern_.expand(w, fwd_->rows());
  if (dp_.rank == 0 || w_exp.maxCoeff() <= 0.0)
    return LowRankPosterior(*prior_, Vector(), Matrix(fwd_->cols(), 0), w);
  LinearMap G = misfit_action_map(*fwd_, w_exp, dp_.sigma);
  GenEigOptions go;
  go.oversample = lowrank_opts_.oversample;
  go.power_iters = lowrank_opts_.power_iters;
  go.seed = lowrank_opts_.seed;
  EigenPairs pairs =
      randomized_gen_eig(G, prior_->metricR(), std::min(dp_.rank, fwd_->cols()), go);
  Index keep = 0;
  while (keep < pairs.rank() && pairs.values(keep) >= floor) ++keep;
  return LowRankPosterior(*prior_, pairs.values.head(keep), pairs.vectors.leftCols(keep), w);
}

namespace {

Vector clamp_box(const Vector& w) { return w.cwiseMax(0.0).cwiseMin(1.0); }

Vector projected_gradient(const Vector& w, const Vector& g) {
  Vector pg = g;
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) <= 0.0 && g(i) > 0.0) pg(i) = 0.0;
    if (w(i) >= 1.0 && g(i) < 0.0) pg(i) = 0.0;
  }
  return pg;
}

}  // namespace

OptimizeResult minimize_box(const std::function<void(const Vector&, double*, Vector*)>& eval,
                            const Vector& w0, const OptimizeOptions& opts) {
  OptimizeResult res;
  Vector w = clamp_box(w0);
  double f;
  Vector g;
  eval(w, &f, &g);
  res.history.push_back(f);

  std::deque<std::pair<Vector, Vector>> pairs;  // (s, y)
  for (int it = 0; it < opts.maxiter; ++it) {
    const Vector pg = projected_gradient(w, g);
    if (pg.lpNorm<Eigen::Infinity>() <= opts.pg_tol * (1.0 + std::abs(f))) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for d = -H g.
    Vector d = -g;
    if (!pairs.empty()) {
      std::vector<double> alpha(pairs.size());
      for (size_t i = pairs.size(); i-- > 0;) {
        const auto& [s, y] = pairs[i];
        alpha[i] = s.dot(d) / s.dot(y);
        d -= alpha[i] * y;
      }
      const auto& [s_last, y_last] = pairs.back();
      d *= s_last.dot(y_last) / y_last.dot(y_last);
      for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& [s, y] = pairs[i];
        const double beta = y.dot(d) / s.dot(y);
        d += (alpha[i] - beta) * s;
      }
    } else {
      const double scale = g.lpNorm<Eigen::Infinity>();
      if (scale > 0.0) d = -g / scale * 0.1;  // modest first move inside the box
    }

    // Backtracking Armijo on the projected path; fall back to steepest descent.
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) d = -pg;
      double t = 1.0;
      for (int ls = 0; ls < opts.max_linesearch; ++ls, t *= 0.5) {
        Vector w_new = clamp_box(w + t * d);
        const Vector step = w_new - w;
        if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
        const double slope = g.dot(step);
        if (slope >= 0.0) break;
        double f_new;
        Vector g_new;
        eval(w_new, &f_new, &g_new);
        if (f_new <= f + 1e-4 * slope) {
          const Vector y = g_new - g;
          if (step.dot(y) > 1e-12 * step.norm() * y.norm()) {
            pairs.emplace_back(step, y);
            if (static_cast<int>(pairs.size()) > opts.memory) pairs.pop_front();
          }
          w = std::move(w_new);
          f = f_new;
          g = std::move(g_new);
          res.history.push_back(f);
          accepted = true;
          break;
        }
      }
    }
    res.iterations = it + 1;
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
  }
  res.w = std::move(w);
  return res;
}

OptimizeResult optimize_design(const TraceEvaluator& evaluator, const Vector& w0,
                               const OptimizeOptions& opts) {
  return minimize_box(
      [&evaluator](const Vector& w, double* f, Vector* g) { evaluator.evaluate(w, f, g); }, w0,
      opts);
}

DesignWeights threshold_design(const DesignWeights& w, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, "threshold_design: threshold must lie in (0,1)");
  DesignWeights out;
  out.w = (w.w.array() >= threshold).cast<double>();
  return out;
}

}  // namespace oedsteer
