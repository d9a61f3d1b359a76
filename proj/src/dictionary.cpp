#include "sdsr/dictionary.hpp"

#include <cmath>
#include <sstream>

#include "sdsr/error.hpp"

namespace sdsr {

Dictionary::Dictionary(Matrix atoms) : atoms_(std::move(atoms)) {
  if (atoms_.rows() == 0 || atoms_.cols() == 0) throw InvalidInput("Dictionary: empty atom matrix");
  require_finite(atoms_, "Dictionary atoms");
  for (std::size_t j = 0; j < atoms_.cols(); ++j) {
    const double n = norm2(atoms_.col_values(j));
    if (std::abs(n - 1.0) > kUnitNormTolerance) {
      std::ostringstream msg;
      msg << "Dictionary: atom " << j << " has norm " << n << ", expected unit norm";
      throw InvalidInput(msg.str());
    }
  }
}

Dictionary Dictionary::from_unnormalized(Matrix raw) {
  require_finite(raw, "Dictionary::from_unnormalized");
  for (std::size_t j = 0; j < raw.cols(); ++j) {
    const double n = norm2(raw.col_values(j));
    if (n == 0.0) {
      std::ostringstream msg;
      msg << "Dictionary: atom " << j << " is all-zero";
      throw InvalidInput(msg.str());
    }
    for (std::size_t i = 0; i < raw.rows(); ++i) raw(i, j) /= n;
  }
  return Dictionary(std::move(raw));
}

Matrix Dictionary::reconstruct(const Matrix& codes) const { return matmul(atoms_, codes); }

}  // namespace sdsr
