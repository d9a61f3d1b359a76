#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sdsr/dictionary.hpp"
#include "sdsr/matrix.hpp"

namespace sdsr {

struct LassoConfig {
  double lambda = 0.85;
  std::size_t max_iters = 300;
  /// Stop once the relative change of the objective between accepted
  /// iterates drops below this.
  double tol = 1e-6;

  void validate() const;
  friend bool operator==(const LassoConfig&, const LassoConfig&) = default;
};

struct LassoSolution {
  std::vector<double> code;
  /// Objective at the initial point followed by every accepted iterate.
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  std::size_t restarts = 0;
  bool converged = false;
};

/// sign(v)·max(|v| − t, 0).
double soft_threshold(double v, double t) noexcept;

/// ½‖x − Dα‖₂² + λ‖α‖₁, evaluated directly from the atoms.
double lasso_objective(const Dictionary& d, const Matrix& x, const Matrix& alpha, double lambda);

/// Largest violation of the lasso optimality conditions at `alpha`:
/// |d_jᵀr − λ·sign(α_j)| on the support, max(|d_jᵀr| − λ, 0) off it,
/// with r = x − Dα.
double lasso_certificate_violation(const Dictionary& d, const Matrix& x, const Matrix& alpha,
                                   double lambda);

/// Accelerated proximal gradient (FISTA) with function-value restart for one
/// fixed dictionary. The Gram matrix and Lipschitz bound are computed once so
/// a solver can be shared, read-only, by concurrent encodes.
class LassoSolver {
 public:
  explicit LassoSolver(const Dictionary& d);

  std::size_t signal_dim() const noexcept { return signal_dim_; }
  std::size_t n_atoms() const noexcept { return n_atoms_; }
  double lipschitz() const noexcept { return lipschitz_; }

  /// Minimises the lasso objective for signal `x`. Starts from zero unless
  /// `warm_start` is given; accepted iterates never increase the objective.
  LassoSolution solve(std::span<const double> x, const LassoConfig& cfg,
                      std::span<const double> warm_start = {}) const;

  /// Encodes every column of `xs`; columns are solved independently, in
  /// parallel. `warm_start`, when non-null, supplies one initial code per column.
  Matrix encode_batch(const Matrix& xs, const LassoConfig& cfg,
                      const Matrix* warm_start = nullptr) const;

 private:
  double objective(std::span<const double> alpha, std::span<const double> gram_alpha,
                   std::span<const double> dtx, double half_xx, double lambda) const;
  bool feature_sign(std::vector<double>& alpha, std::vector<double>& gram_alpha, double& f,
                    std::span<const double> dtx, double half_xx, double lambda,
                    bool from_zero) const;
  void gram_times(std::span<const double> v, std::span<double> out) const;
  /// Active-set refinement of `alpha`. Keeps any objective decrease it finds
  /// and returns true once the optimality conditions hold.
  bool polish(std::vector<double>& alpha, std::vector<double>& gram_alpha, double& f,
              std::span<const double> dtx, double half_xx, double lambda) const;

  Matrix atoms_;
  std::size_t signal_dim_;
  std::size_t n_atoms_;
  Matrix gram_;
  double lipschitz_;
  double lipschitz_cap_;
};

/// Lasso code of one signal, zero-initialised.
Matrix sparse_encode(const Dictionary& d, const Matrix& x, const LassoConfig& cfg);

/// Column i of the result equals sparse_encode(d, xs[:, i], cfg).
Matrix sparse_encode_batch(const Dictionary& d, const Matrix& xs, const LassoConfig& cfg);

}  // namespace sdsr
