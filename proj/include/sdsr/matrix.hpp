#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sdsr {

/// Dense real matrix, row-major. Column vectors are `n x 1` matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  /// Copy of column `c` as an `rows x 1` matrix.
  Matrix col(std::size_t c) const;
  std::vector<double> col_values(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> values);
  void set_col(std::size_t c, const Matrix& column);

  Matrix transposed() const;
  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// Throws InvalidInput naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Solves a·Z = b for symmetric positive definite `a` by Cholesky
/// factorisation. No regularisation is added. A pivot that is not
/// positive (relative to the diagonal scale) raises NumericalError
/// carrying the pivot index.
Matrix solve_spd(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double l1_norm(const Matrix& v);
double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> v) noexcept;

}  // namespace sdsr
