#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace itreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Finite dense matrix with at least one row and one column. Immutable once
// built; the forward operator X, the difference operator and masks all use it.
class DenseOperator {
 public:
  explicit DenseOperator(Matrix entries);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(entries_.cols()); }
  const Matrix& matrix() const noexcept { return entries_; }

  Vector apply(const Vector& x) const;
  Vector apply_adjoint(const Vector& y) const;

 private:
  Matrix entries_;
};

// Largest singular value (full SVD).
double spectral_norm(const DenseOperator& a);
double spectral_norm(const Matrix& a);

// (p-1) x p forward differences: (Dw)_i = w_{i+1} - w_i.
DenseOperator diff_operator(std::size_t p);

// rows x cols 0-1 mask with exactly round(density * rows * cols) ones.
DenseOperator mask_operator(std::size_t rows, std::size_t cols, double density,
                            std::uint64_t seed);

// Diagonal operator acting on column-major vectorized matrices.
DenseOperator mask_as_diagonal(const DenseOperator& mask);

bool all_finite(const Matrix& a);

}  // namespace itreg
