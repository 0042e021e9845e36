#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace idnmf {

/// Dense row-major storage used for every matrix in the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Entries in [-kClampTolerance, 0) are treated as round-off and clamped to 0.
inline constexpr double kClampTolerance = 1e-14;

/// Row sums of a row-stochastic matrix must equal 1 to this tolerance.
inline constexpr double kStochasticTolerance = 1e-12;

/**
 * @brief Elementwise nonnegative m x n data matrix with at least one positive
 * entry.
 *
 * Construction clamps entries in [-1e-14, 0) to zero and rejects anything
 * more negative, any non-finite entry, empty shapes and the all-zero matrix.
 * Instances are immutable.
 */
class DataMatrix {
 public:
  /// @throws DomainError on negative, non-finite or all-zero input.
  /// @throws UsageError on an empty shape.
  explicit DataMatrix(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  /// Sum of all entries, accumulated in row-major order.
  double total_mass() const noexcept { return total_; }

 private:
  Matrix values_;
  double total_ = 0.0;
};

/**
 * @brief Nonnegative factors W (m x k) and H (k x n) with H row stochastic.
 *
 * Invariants: 1 <= k <= min(m, n), all entries nonnegative, every row of H
 * sums to 1 within 1e-12 (so no row of H is zero).
 */
class FactorPair {
 public:
  /// @throws UsageError on inconsistent shapes or rank out of range.
  /// @throws DomainError on negative/non-finite entries or a non-stochastic H.
  FactorPair(Matrix w, Matrix h);

  const Matrix& w() const noexcept { return w_; }
  const Matrix& h() const noexcept { return h_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(w_.rows()); }
  std::size_t rank() const noexcept { return static_cast<std::size_t>(w_.cols()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(h_.cols()); }

 private:
  Matrix w_;
  Matrix h_;
};

/// Clamps [-1e-14, 0) to 0 in place and validates finiteness and sign.
/// @throws DomainError naming the offending cell.
void clamp_nonnegative(Matrix& m, const char* what);

/// @throws DomainError if any entry is negative or non-finite.
void require_nonnegative(const Matrix& m, const char* what);

/// Largest absolute elementwise difference; shapes must agree.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace idnmf
