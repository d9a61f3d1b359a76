#pragma once

#include <cstddef>

#include "sdsr/matrix.hpp"

namespace sdsr {

/// Column-normalised atom matrix (signal_dim x n_atoms). Every atom has unit
/// 2-norm within 1e-6 and all entries are finite; construction enforces it.
class Dictionary {
 public:
  static constexpr double kUnitNormTolerance = 1e-6;

  explicit Dictionary(Matrix atoms);

  /// Rescales every column of `raw` to unit norm. Zero columns are rejected.
  static Dictionary from_unnormalized(Matrix raw);

  const Matrix& atoms() const noexcept { return atoms_; }
  std::size_t signal_dim() const noexcept { return atoms_.rows(); }
  std::size_t n_atoms() const noexcept { return atoms_.cols(); }

  /// D·codes.
  Matrix reconstruct(const Matrix& codes) const;

  friend bool operator==(const Dictionary&, const Dictionary&) = default;

 private:
  Matrix atoms_;
};

}  // namespace sdsr
