#include "itreg/linops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "itreg/errors.hpp"

namespace itreg {

bool all_finite(const Matrix& a) { return a.allFinite(); }

DenseOperator::DenseOperator(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.cols() < 1) {
    throw InputError("DenseOperator: need at least one row and one column");
  }
  if (!entries_.allFinite()) {
    throw InputError("DenseOperator: non-finite entry");
  }
}

Vector DenseOperator::apply(const Vector& x) const {
  if (x.size() != entries_.cols()) throw InputError("DenseOperator::apply: dimension mismatch");
  return entries_ * x;
}

Vector DenseOperator::apply_adjoint(const Vector& y) const {
  if (y.size() != entries_.rows()) {
    throw InputError("DenseOperator::apply_adjoint: dimension mismatch");
  }
  return entries_.transpose() * y;
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (!a.allFinite()) throw InputError("spectral_norm: non-finite entry");
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

double spectral_norm(const DenseOperator& a) { return spectral_norm(a.matrix()); }

DenseOperator diff_operator(std::size_t p) {
  if (p < 2) throw InputError("diff_operator: p must be at least 2");
  const auto m = static_cast<Eigen::Index>(p);
  Matrix d = Matrix::Zero(m - 1, m);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return DenseOperator(std::move(d));
}

DenseOperator mask_operator(std::size_t rows, std::size_t cols, double density,
                            std::uint64_t seed) {
  if (!(density > 0.0 && density <= 1.0)) {
    throw InputError("mask_operator: density must lie in (0, 1]");
  }
  if (rows == 0 || cols == 0) throw InputError("mask_operator: empty shape");
  const std::size_t total = rows * cols;
  const auto ones = static_cast<std::size_t>(std::llround(density * static_cast<double>(total)));

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < std::min(ones, total); ++i) {
    m.data()[order[i]] = 1.0;
  }
  return DenseOperator(std::move(m));
}

DenseOperator mask_as_diagonal(const DenseOperator& mask) {
  const Eigen::Map<const Vector> flat(mask.matrix().data(), mask.matrix().size());
  return DenseOperator(Matrix(flat.asDiagonal()));
}

}  // namespace itreg
