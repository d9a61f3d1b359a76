#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "sdsr/dictionary.hpp"
#include "sdsr/matrix.hpp"
#include "sdsr/sparse_coding.hpp"

namespace sdsr {

struct DictLearnConfig {
  std::size_t n_atoms = 100;
  double lambda = 0.85;
  std::size_t epochs = 30;
  /// Solver settings for the coding half-step. Its lambda is ignored in
  /// favour of `lambda` above.
  LassoConfig lasso{};
  std::uint64_t seed = 0;
  double dead_atom_threshold = 1e-8;
  /// Ridge added to A·Aᵀ in the dictionary half-step.
  double ridge = 1e-6;

  void validate() const;
  LassoConfig coding_config() const;
  friend bool operator==(const DictLearnConfig&, const DictLearnConfig&) = default;
};

/// Picks `n_atoms` data columns (without replacement when possible; beyond
/// that with replacement plus N(0, 1e-3²) jitter) and normalises them.
Dictionary init_dictionary(const Matrix& xs, std::size_t n_atoms, std::uint64_t seed);

/// Closed-form least-squares dictionary X·Aᵀ·(A·Aᵀ + ridge·I)⁻¹, before
/// normalisation.
Matrix mod_atoms(const Matrix& xs, const Matrix& codes, double ridge);

struct DictionaryUpdate {
  Dictionary dictionary;
  /// Pre-normalisation norm of each MOD atom.
  std::vector<double> atom_norms;
  /// Atoms whose MOD norm fell below the dead-atom threshold and were
  /// replaced by the worst-reconstructed data column.
  std::vector<std::size_t> replaced;
};

DictionaryUpdate update_dictionary(const Matrix& xs, const Matrix& codes, double ridge,
                                   double dead_atom_threshold = 1e-8);

/// (1/n)·Σ_i ½‖x_i − Dα_i‖² + λ‖α_i‖₁.
double mean_lasso_objective(const Dictionary& d, const Matrix& xs, const Matrix& codes,
                            double lambda);

struct EpochSnapshot {
  std::size_t epoch;
  const Dictionary& dictionary;
  const Matrix& inputs;
  const Matrix& codes;
  double lambda;
};
using EpochObserver = std::function<void(const EpochSnapshot&)>;

struct LevelResult {
  Dictionary dictionary;
  /// Codes of `xs` under the returned dictionary, from a zero start.
  Matrix codes;
  /// Entry 0 is the mean objective after the first coding pass and entry e
  /// the objective held after epoch e; epochs + 1 values in all.
  std::vector<double> objective_trace;
  /// Epochs e whose update replaced dead atoms; trace[e] may exceed
  /// trace[e - 1] only for these.
  std::vector<std::size_t> replacement_epochs;
  /// Dictionary updates discarded because they would have raised the objective.
  std::size_t rejected_updates = 0;
};

/// Alternating minimisation of the single-level dictionary objective:
/// `epochs` rounds of {MOD update; sparse coding}. Each round re-codes from
/// the previous codes rescaled to the renormalised atoms and is kept only if
/// the objective does not rise, so the trace is non-increasing apart from
/// dead-atom replacements.
LevelResult learn_level(const Matrix& xs, const DictLearnConfig& cfg,
                        const EpochObserver& observer = {});

}  // namespace sdsr
