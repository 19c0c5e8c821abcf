#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "itreg/linops.hpp"

namespace itreg {

enum class RegKind { L1, L12, TV1D, Nuclear };

std::string_view to_string(RegKind kind);
RegKind reg_kind_from_string(std::string_view name);

// True for the kinds whose model manifold is an affine subspace.
constexpr bool is_affine(RegKind kind) { return kind != RegKind::Nuclear; }
constexpr bool is_polyhedral(RegKind kind) {
  return kind == RegKind::L1 || kind == RegKind::TV1D;
}

using IndexSet = std::vector<std::size_t>;

class RegularizerSpec {
 public:
  static RegularizerSpec l1(std::size_t dim);
  // Disjoint groups covering 0..dim-1.
  static RegularizerSpec l12(std::size_t dim, std::vector<IndexSet> groups);
  // Contiguous groups of equal size; group_size must divide dim.
  static RegularizerSpec l12_uniform(std::size_t dim, std::size_t group_size);
  static RegularizerSpec tv1d(std::size_t dim);
  // Acts on column-major vectorized rows x cols matrices.
  static RegularizerSpec nuclear(std::size_t rows, std::size_t cols);

  RegKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<IndexSet>& groups() const noexcept { return groups_; }
  std::size_t matrix_rows() const noexcept { return rows_; }
  std::size_t matrix_cols() const noexcept { return cols_; }

 private:
  RegularizerSpec(RegKind kind, std::size_t dim) : kind_(kind), dim_(dim) {}

  RegKind kind_;
  std::size_t dim_;
  std::vector<IndexSet> groups_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

// Discrete structure of a point. `active` holds the support (L1), the active
// group indices (L12) or the jump positions of D w (TV1D), sorted ascending.
struct ModelDescriptor {
  RegKind kind = RegKind::L1;
  IndexSet active;
  std::size_t rank = 0;  // Nuclear only

  std::size_t size() const noexcept {
    return kind == RegKind::Nuclear ? rank : active.size();
  }
  friend bool operator==(const ModelDescriptor& a, const ModelDescriptor& b) {
    if (a.kind != b.kind) return false;
    return a.kind == RegKind::Nuclear ? a.rank == b.rank : a.active == b.active;
  }
};

struct CertificateReport {
  Vector certificate_dual;
  Vector z;  // -X^T certificate_dual
  double on_model_residual = 0.0;
  double off_model_margin = 0.0;
  bool nondegenerate = false;
};

// 0 for the kinds whose prox emits exact zeros, 1e-8 (relative) for Nuclear.
double default_descriptor_tol(RegKind kind);

double value(const RegularizerSpec& reg, const Vector& w);

// argmin_u R(u) + 1/(2 tau) |u - x|^2
Vector prox(const RegularizerSpec& reg, double tau, const Vector& x);

// Exact prox of lambda * sum_i |u_{i+1} - u_i| by a direct taut-string scan.
Vector tv1d_prox(const Vector& x, double lambda);

ModelDescriptor model_descriptor(const RegularizerSpec& reg, const Vector& w, double tol);
inline ModelDescriptor model_descriptor(const RegularizerSpec& reg, const Vector& w) {
  return model_descriptor(reg, w, default_descriptor_tol(reg.kind()));
}

// Orthonormal basis (columns) of the model tangent space T. Affine kinds only.
Matrix tangent_basis(const RegularizerSpec& reg, const ModelDescriptor& d);
DenseOperator tangent_projector(const RegularizerSpec& reg, const ModelDescriptor& d);

// P_T (Hessian of a smooth representative) P_T at w on the model of d.
Matrix riemannian_hessian(const RegularizerSpec& reg, const Vector& w, const ModelDescriptor& d);

CertificateReport check_source_condition(const RegularizerSpec& reg, double alpha,
                                         const Vector& w_true, const DenseOperator& x,
                                         double tol_eq);

}  // namespace itreg
