#include "sdsr/sparse_coding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "sdsr/error.hpp"
#include "sdsr/parallel.hpp"

namespace sdsr {

namespace {

constexpr std::size_t kPowerIterations = 50;
constexpr double kPowerTolerance = 1e-6;
constexpr double kLipschitzSafety = 1.01;
// Subgradient residual a stalled run must reach before it is allowed to stop.
constexpr double kKktTarget = 1e-6;

void check_signal(const Dictionary& d, const Matrix& x, const char* op) {
  if (x.cols() != 1 || x.rows() != d.signal_dim()) {
    std::ostringstream msg;
    msg << op << ": signal is " << x.rows() << "x" << x.cols() << ", dictionary expects "
        << d.signal_dim() << "x1";
    throw InvalidInput(msg.str());
  }
  require_finite(x, op);
}

void check_code(const Dictionary& d, const Matrix& alpha, const char* op) {
  if (alpha.cols() != 1 || alpha.rows() != d.n_atoms()) {
    std::ostringstream msg;
    msg << op << ": code is " << alpha.rows() << "x" << alpha.cols() << ", dictionary has "
        << d.n_atoms() << " atoms";
    throw InvalidInput(msg.str());
  }
  require_finite(alpha, op);
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double largest_eigenvalue(const Matrix& g) {
  const std::size_t n = g.rows();
  std::mt19937_64 rng(0x5d5a);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  std::vector<double> v(n), w(n);
  for (double& x : v) x = unif(rng);
  double nv = norm2(v);
  for (double& x : v) x /= nv;

  double estimate = 0.0;
  for (std::size_t it = 0; it < kPowerIterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) w[i] = dot(g.row(i), v);
    const double next = dot(v, w);  // Rayleigh quotient
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    const bool settled = it > 0 && std::abs(next - estimate) <= kPowerTolerance * std::abs(next);
    estimate = next;
    if (settled) break;
  }
  return estimate;
}

double sign_of(double v) noexcept { return v > 0 ? 1.0 : -1.0; }

// Max violation of the optimality conditions; gram_alpha - dtx is -Dᵀr.
double kkt_violation(std::span<const double> alpha, std::span<const double> gram_alpha,
                     std::span<const double> dtx, double lambda) {
  double worst = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double c = dtx[i] - gram_alpha[i];
    const double v = alpha[i] != 0.0 ? std::abs(c - lambda * sign_of(alpha[i]))
                                     : std::max(0.0, std::abs(c) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

void LassoConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidInput("LassoConfig: lambda must be finite and >= 0");
  if (max_iters < 1) throw InvalidInput("LassoConfig: max_iters must be >= 1");
  if (!(tol > 0.0)) throw InvalidInput("LassoConfig: tol must be > 0");
}

double soft_threshold(double v, double t) noexcept {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double lasso_objective(const Dictionary& d, const Matrix& x, const Matrix& alpha, double lambda) {
  check_signal(d, x, "lasso_objective");
  check_code(d, alpha, "lasso_objective");
  const Matrix r = x - d.reconstruct(alpha);
  const double rn = frobenius_norm(r);
  return 0.5 * rn * rn + lambda * l1_norm(alpha);
}

double lasso_certificate_violation(const Dictionary& d, const Matrix& x, const Matrix& alpha,
                                   double lambda) {
  check_signal(d, x, "lasso_certificate_violation");
  check_code(d, alpha, "lasso_certificate_violation");
  const Matrix r = x - d.reconstruct(alpha);
  const Matrix corr = matmul_tn(d.atoms(), r);
  double worst = 0.0;
  for (std::size_t j = 0; j < d.n_atoms(); ++j) {
    const double c = corr(j, 0);
    const double a = alpha(j, 0);
    const double v =
        a != 0.0 ? std::abs(c - lambda * (a > 0 ? 1.0 : -1.0)) : std::max(0.0, std::abs(c) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

LassoSolver::LassoSolver(const Dictionary& d)
    : atoms_(d.atoms()),
      signal_dim_(d.signal_dim()),
      n_atoms_(d.n_atoms()),
      gram_(matmul_tn(d.atoms(), d.atoms())) {
  const double lmax = largest_eigenvalue(gram_);
  // Rayleigh quotients never exceed the true top eigenvalue, and the top
  // eigenvalue is at least the largest diagonal entry.
  double max_diag = 0.0;
  double gershgorin = 0.0;
  for (std::size_t i = 0; i < n_atoms_; ++i) {
    max_diag = std::max(max_diag, gram_(i, i));
    double row_sum = 0.0;
    for (double v : gram_.row(i)) row_sum += std::abs(v);
    gershgorin = std::max(gershgorin, row_sum);
  }
  lipschitz_ = kLipschitzSafety * std::max(lmax, max_diag);
  lipschitz_cap_ = std::max(lipschitz_, gershgorin);
  if (!(lipschitz_ > 0.0) || !std::isfinite(lipschitz_)) {
    std::ostringstream msg;
    msg << "LassoSolver: Lipschitz estimate " << lipschitz_ << " is not positive";
    throw NumericalError(msg.str());
  }
}

void LassoSolver::gram_times(std::span<const double> v, std::span<double> out) const {
  for (std::size_t i = 0; i < n_atoms_; ++i) out[i] = dot(gram_.row(i), v);
}

double LassoSolver::objective(std::span<const double> alpha, std::span<const double> gram_alpha,
                              std::span<const double> dtx, double half_xx, double lambda) const {
  double quad = 0.0;
  double lin = 0.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i < n_atoms_; ++i) {
    quad += alpha[i] * gram_alpha[i];
    lin += alpha[i] * dtx[i];
    l1 += std::abs(alpha[i]);
  }
  return half_xx - lin + 0.5 * quad + lambda * l1;
}

LassoSolution LassoSolver::solve(std::span<const double> x, const LassoConfig& cfg,
                                 std::span<const double> warm_start) const {
  cfg.validate();
  if (x.size() != signal_dim_) throw InvalidInput("LassoSolver::solve: signal length mismatch");
  if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }))
    throw InvalidInput("LassoSolver::solve: signal contains non-finite values");
  if (!warm_start.empty() && warm_start.size() != n_atoms_)
    throw InvalidInput("LassoSolver::solve: warm start length mismatch");

  const std::size_t n = n_atoms_;
  std::vector<double> dtx(n, 0.0);
  for (std::size_t k = 0; k < signal_dim_; ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    auto row = atoms_.row(k);
    for (std::size_t i = 0; i < n; ++i) dtx[i] += row[i] * xk;
  }
  const double half_xx = 0.5 * dot(x, x);

  LassoSolution sol;
  std::vector<double> cur(n, 0.0);
  if (!warm_start.empty()) std::copy(warm_start.begin(), warm_start.end(), cur.begin());
  std::vector<double> g_cur(n), y(cur), g_y(n), next(n), g_next(n);
  gram_times(cur, g_cur);
  double f_cur = objective(cur, g_cur, dtx, half_xx, cfg.lambda);
  sol.objective_trace.push_back(f_cur);

  double step_l = lipschitz_;
  double t = 1.0;
  std::copy(g_cur.begin(), g_cur.end(), g_y.begin());

  auto prox_step = [&](const std::vector<double>& from, const std::vector<double>& g_from) {
    const double inv_l = 1.0 / step_l;
    const double thr = cfg.lambda * inv_l;
    for (std::size_t i = 0; i < n; ++i)
      next[i] = soft_threshold(from[i] - inv_l * (g_from[i] - dtx[i]), thr);
    gram_times(next, g_next);
    return objective(next, g_next, dtx, half_xx, cfg.lambda);
  };

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    ++sol.iterations;
    double f_next = prox_step(y, g_y);
    if (f_next > f_cur) {
      // Momentum overshot: restart from the last accepted point. A plain
      // proximal step from there cannot increase the objective unless the
      // Lipschitz estimate is too small, in which case back off.
      ++sol.restarts;
      t = 1.0;
      f_next = prox_step(cur, g_cur);
      while (f_next > f_cur && step_l < lipschitz_cap_) {
        step_l = std::min(2.0 * step_l, lipschitz_cap_);
        f_next = prox_step(cur, g_cur);
      }
      if (f_next > f_cur) {
        // No representable descent left.
        const double before = f_cur;
        polish(cur, g_cur, f_cur, dtx, half_xx, cfg.lambda);
        if (f_cur < before) sol.objective_trace.push_back(f_cur);
        sol.converged = true;
        break;
      }
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = next[i] + beta * (next[i] - cur[i]);
      g_y[i] = g_next[i] + beta * (g_next[i] - g_cur[i]);
    }
    t = t_next;
    const double rel =
        (f_cur - f_next) / std::max(std::abs(f_cur), std::numeric_limits<double>::min());
    cur.swap(next);
    g_cur.swap(g_next);
    f_cur = f_next;
    sol.objective_trace.push_back(f_cur);
    if (rel < cfg.tol) {
      const double before = f_cur;
      const bool exact = polish(cur, g_cur, f_cur, dtx, half_xx, cfg.lambda);
      if (f_cur < before) sol.objective_trace.push_back(f_cur);
      if (exact) {
        sol.converged = true;
        break;
      }
      if (kkt_violation(cur, g_cur, dtx, cfg.lambda) <= kKktTarget) {
        sol.converged = true;
        break;
      }
      // Stalled short of optimality: drop the momentum and keep going.
      t = 1.0;
      y = cur;
      g_y = g_cur;
    }
  }
  if (!sol.converged) {
    const double before = f_cur;
    sol.converged = polish(cur, g_cur, f_cur, dtx, half_xx, cfg.lambda);
    if (f_cur < before) sol.objective_trace.push_back(f_cur);
  }
  sol.code = std::move(cur);
  return sol;
}

bool LassoSolver::polish(std::vector<double>& alpha, std::vector<double>& gram_alpha, double& f,
                         std::span<const double> dtx, double half_xx, double lambda) const {
  if (feature_sign(alpha, gram_alpha, f, dtx, half_xx, lambda, false)) return true;
  // The iterate's support can be too large or degenerate to start from;
  // the search from zero only ever holds independent active sets.
  return feature_sign(alpha, gram_alpha, f, dtx, half_xx, lambda, true);
}

bool LassoSolver::feature_sign(std::vector<double>& alpha, std::vector<double>& gram_alpha,
                               double& f, std::span<const double> dtx, double half_xx,
                               double lambda, bool from_zero) const {
  // Solve the linear system on the active set and sign pattern, line-search
  // towards it through the sign changes, and grow the active set by the
  // worst violator. Every accepted move lowers the objective.
  const std::size_t n = n_atoms_;
  std::vector<double> cur = alpha, g_cur = gram_alpha;
  double f_cur = f;
  if (from_zero) {
    std::fill(cur.begin(), cur.end(), 0.0);
    std::fill(g_cur.begin(), g_cur.end(), 0.0);
    f_cur = half_xx;
  }
  std::vector<double> theta(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (cur[i] != 0.0) theta[i] = sign_of(cur[i]);

  auto commit = [&] {
    if (f_cur < f || (from_zero && f_cur == f)) {
      alpha = cur;
      gram_alpha = g_cur;
      f = f_cur;
    }
  };

  std::vector<double> cand(n), g(n), probe(n), g_probe(n);
  const std::size_t max_rounds = 4 * n + 8;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < n; ++i)
      if (theta[i] != 0.0) active.push_back(i);
    const std::size_t m = active.size();

    if (m > 0) {
      Matrix a(m, m), b(m, 1);
      double diag = 0.0;
      for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = 0; q < m; ++q) a(p, q) = gram_(active[p], active[q]);
        b(p, 0) = dtx[active[p]] - lambda * theta[active[p]];
        diag = std::max(diag, a(p, p));
      }
      // A dependent active set has no unique minimiser. The ridged solution
      // runs far along the null direction, so the line search below stops at
      // the first sign change and the set shrinks again.
      auto ridged = [&](Matrix g) {
        for (std::size_t p = 0; p < m; ++p) g(p, p) += 1e-9 * diag;
        return solve_spd(g, b);
      };
      Matrix z;
      try {
        z = m > signal_dim_ ? ridged(a) : solve_spd(a, b);
      } catch (const NumericalError&) {
        try {
          z = ridged(a);
        } catch (const NumericalError&) {
          break;
        }
      }
      std::fill(cand.begin(), cand.end(), 0.0);
      for (std::size_t p = 0; p < m; ++p) cand[active[p]] = z(p, 0);

      // Candidates on the segment cur -> cand: the end point and every
      // coordinate's zero crossing.
      std::vector<double> steps{1.0};
      for (std::size_t i : active)
        if (cur[i] != 0.0 && cur[i] * cand[i] < 0.0) steps.push_back(cur[i] / (cur[i] - cand[i]));
      double best_f = f_cur;
      std::vector<double> best = cur, g_best = g_cur;
      for (double s : steps) {
        for (std::size_t i = 0; i < n; ++i) {
          probe[i] = cur[i] + s * (cand[i] - cur[i]);
          if (std::abs(probe[i]) <= 1e-15 * std::abs(cur[i])) probe[i] = 0.0;
        }
        gram_times(probe, g_probe);
        const double fp = objective(probe, g_probe, dtx, half_xx, lambda);
        if (fp < best_f) {
          best_f = fp;
          best = probe;
          g_best = g_probe;
        }
      }
      const bool moved = best_f < f_cur;
      if (moved) {
        cur.swap(best);
        g_cur.swap(g_best);
        f_cur = best_f;
      }
      bool consistent = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (cur[i] == 0.0 && theta[i] != 0.0) theta[i] = 0.0;
        if (cur[i] != 0.0) theta[i] = sign_of(cur[i]);
        if (theta[i] != 0.0 && sign_of(cand[i]) != theta[i]) consistent = false;
      }
      if (!consistent) continue;
      // Stopped at a sign change: re-solve on the shrunken support.
      double on_support = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (cur[i] != 0.0)
          on_support = std::max(on_support, std::abs(dtx[i] - g_cur[i] - lambda * theta[i]));
      if (on_support > kKktTarget && moved) continue;
    }

    if (kkt_violation(cur, g_cur, dtx, lambda) <= kKktTarget) {
      commit();
      return true;
    }
    // Grow the active set by the zero coordinate with the largest violation.
    std::size_t worst = n;
    double worst_v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (cur[i] != 0.0) continue;
      const double v = std::abs(dtx[i] - g_cur[i]) - lambda;
      if (v > worst_v) {
        worst_v = v;
        worst = i;
      }
    }
    if (worst == n) break;  // the violation sits on the support; fall back to iterating
    theta[worst] = sign_of(dtx[worst] - g_cur[worst]);
  }
  commit();
  return false;
}

Matrix LassoSolver::encode_batch(const Matrix& xs, const LassoConfig& cfg,
                                 const Matrix* warm_start) const {
  cfg.validate();
  if (xs.rows() != signal_dim_) {
    std::ostringstream msg;
    msg << "encode_batch: signals have " << xs.rows() << " rows, dictionary expects "
        << signal_dim_;
    throw InvalidInput(msg.str());
  }
  require_finite(xs, "encode_batch signals");
  if (warm_start && (warm_start->rows() != n_atoms_ || warm_start->cols() != xs.cols()))
    throw InvalidInput("encode_batch: warm start shape mismatch");

  std::vector<std::vector<double>> codes(xs.cols());
  parallel_for(xs.cols(), [&](std::size_t c) {
    const std::vector<double> x = xs.col_values(c);
    if (warm_start) {
      const std::vector<double> init = warm_start->col_values(c);
      codes[c] = solve(x, cfg, init).code;
    } else {
      codes[c] = solve(x, cfg).code;
    }
  });
  Matrix out(n_atoms_, xs.cols());
  for (std::size_t c = 0; c < xs.cols(); ++c) out.set_col(c, codes[c]);
  return out;
}

Matrix sparse_encode(const Dictionary& d, const Matrix& x, const LassoConfig& cfg) {
  check_signal(d, x, "sparse_encode");
  const LassoSolver solver(d);
  return Matrix::column(solver.solve(x.data(), cfg).code);
}

Matrix sparse_encode_batch(const Dictionary& d, const Matrix& xs, const LassoConfig& cfg) {
  const LassoSolver solver(d);
  return solver.encode_batch(xs, cfg);
}

}  // namespace sdsr
