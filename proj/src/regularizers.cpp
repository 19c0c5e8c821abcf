#include "itreg/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "itreg/errors.hpp"

namespace itreg {
namespace {

void require_dim(const RegularizerSpec& reg, const Vector& w, const char* who) {
  if (static_cast<std::size_t>(w.size()) != reg.dim()) {
    throw InputError(std::string(who) + ": vector has dimension " + std::to_string(w.size()) +
                     ", regularizer expects " + std::to_string(reg.dim()));
  }
}

Eigen::Map<const Matrix> as_matrix(const RegularizerSpec& reg, const Vector& w) {
  return {w.data(), static_cast<Eigen::Index>(reg.matrix_rows()),
          static_cast<Eigen::Index>(reg.matrix_cols())};
}

Vector group_slice(const Vector& w, const IndexSet& g) {
  Vector out(static_cast<Eigen::Index>(g.size()));
  for (std::size_t j = 0; j < g.size(); ++j) out(static_cast<Eigen::Index>(j)) = w(g[j]);
  return out;
}

Vector tv_differences(const Vector& w) {
  if (w.size() < 2) return Vector(0);
  return w.tail(w.size() - 1) - w.head(w.size() - 1);
}

// Orthonormal basis of the nuclear-norm tangent space {U A^T + B V^T} at a
// rank-r point, expressed on column-major vectorizations.
Matrix nuclear_tangent_basis(const Matrix& u, const Matrix& v) {
  const Eigen::Index m = u.rows();
  const Eigen::Index n = v.rows();
  const Matrix pu = u * u.transpose();
  const Matrix pv = v * v.transpose();
  Matrix proj(m * n, m * n);
  Matrix e = Matrix::Zero(m, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < m; ++r) {
      e(r, c) = 1.0;
      const Matrix pe = pu * e + e * pv - pu * e * pv;
      proj.col(c * m + r) = Eigen::Map<const Vector>(pe.data(), m * n);
      e(r, c) = 0.0;
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (proj + proj.transpose()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    if (eig.eigenvalues()(i) > 0.5) keep.push_back(i);
  }
  Matrix basis(m * n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    basis.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(keep[j]);
  }
  return basis;
}

}  // namespace

std::string_view to_string(RegKind kind) {
  switch (kind) {
    case RegKind::L1: return "l1";
    case RegKind::L12: return "l12";
    case RegKind::TV1D: return "tv1d";
    case RegKind::Nuclear: return "nuclear";
  }
  return "unknown";
}

RegKind reg_kind_from_string(std::string_view name) {
  if (name == "l1") return RegKind::L1;
  if (name == "l12") return RegKind::L12;
  if (name == "tv1d") return RegKind::TV1D;
  if (name == "nuclear") return RegKind::Nuclear;
  throw InputError("unknown regularizer '" + std::string(name) + "'");
}

RegularizerSpec RegularizerSpec::l1(std::size_t dim) {
  if (dim == 0) throw InputError("l1: dimension must be positive");
  return {RegKind::L1, dim};
}

RegularizerSpec RegularizerSpec::l12(std::size_t dim, std::vector<IndexSet> groups) {
  if (dim == 0) throw InputError("l12: dimension must be positive");
  std::vector<int> seen(dim, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw InputError("l12: empty group");
    for (auto i : g) {
      if (i >= dim) throw InputError("l12: group index out of range");
      if (seen[i]++) throw InputError("l12: groups overlap at coordinate " + std::to_string(i));
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw InputError("l12: groups do not cover every coordinate");
  }
  RegularizerSpec spec(RegKind::L12, dim);
  spec.groups_ = std::move(groups);
  return spec;
}

RegularizerSpec RegularizerSpec::l12_uniform(std::size_t dim, std::size_t group_size) {
  if (group_size == 0 || dim % group_size != 0) {
    throw InputError("l12_uniform: group size must divide the dimension");
  }
  std::vector<IndexSet> groups(dim / group_size);
  for (std::size_t i = 0; i < dim; ++i) groups[i / group_size].push_back(i);
  return l12(dim, std::move(groups));
}

RegularizerSpec RegularizerSpec::tv1d(std::size_t dim) {
  if (dim < 2) throw InputError("tv1d: dimension must be at least 2");
  return {RegKind::TV1D, dim};
}

RegularizerSpec RegularizerSpec::nuclear(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw InputError("nuclear: empty matrix shape");
  RegularizerSpec spec(RegKind::Nuclear, rows * cols);
  spec.rows_ = rows;
  spec.cols_ = cols;
  return spec;
}

double default_descriptor_tol(RegKind kind) { return kind == RegKind::Nuclear ? 1e-8 : 0.0; }

double value(const RegularizerSpec& reg, const Vector& w) {
  require_dim(reg, w, "value");
  switch (reg.kind()) {
    case RegKind::L1:
      return w.lpNorm<1>();
    case RegKind::L12: {
      double s = 0.0;
      for (const auto& g : reg.groups()) s += group_slice(w, g).norm();
      return s;
    }
    case RegKind::TV1D:
      return tv_differences(w).lpNorm<1>();
    case RegKind::Nuclear: {
      Eigen::JacobiSVD<Matrix> svd(as_matrix(reg, w));
      return svd.singularValues().sum();
    }
  }
  return 0.0;
}

// Condat's direct algorithm for the 1-d total variation prox. Constant runs
// of the output are written from a single value, so jumps are exact zeros.
static Vector tv1d_taut_string(const Vector& input, double lambda);

namespace {

// Re-derives each constant run's level from the jump signs: on a run [a, b],
// level = mean(x) - (p_{a-1} - p_b) / len with p = lambda sign(jump). Keeps
// constant inputs exact; the scan's own levels are kept if a sign would flip.
void polish_tv_levels(const Vector& x, double lambda, Vector& out) {
  const Eigen::Index n = out.size();
  Vector level(n);
  auto jump_sign = [&](Eigen::Index i) {  // sign of out(i+1) - out(i)
    return out(i + 1) > out(i) ? 1.0 : (out(i + 1) < out(i) ? -1.0 : 0.0);
  };
  for (Eigen::Index a = 0; a < n;) {
    Eigen::Index b = a;
    while (b + 1 < n && out(b + 1) == out(a)) ++b;
    const double len = static_cast<double>(b - a + 1);
    double dev = 0.0;
    for (Eigen::Index i = a + 1; i <= b; ++i) dev += x(i) - x(a);
    const double p_left = a > 0 ? lambda * jump_sign(a - 1) : 0.0;
    const double p_right = b + 1 < n ? lambda * jump_sign(b) : 0.0;
    level.segment(a, b - a + 1).setConstant(x(a) + dev / len - (p_left - p_right) / len);
    a = b + 1;
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double s = jump_sign(i);
    const double d = level(i + 1) - level(i);
    if ((s > 0.0 && !(d > 0.0)) || (s < 0.0 && !(d < 0.0))) return;
  }
  out = level;
}

}  // namespace

Vector tv1d_prox(const Vector& input, double lambda) {
  Vector out = tv1d_taut_string(input, lambda);
  if (lambda > 0.0 && out.size() > 0) polish_tv_levels(input, lambda, out);
  return out;
}

static Vector tv1d_taut_string(const Vector& input, double lambda) {
  const Eigen::Index width = input.size();
  Vector output(width);
  if (width == 0) return output;
  if (lambda <= 0.0) return input;

  Eigen::Index k = 0, k0 = 0, kplus = 0, kminus = 0;
  double umin = lambda, umax = -lambda;
  double vmin = input(0) - lambda, vmax = input(0) + lambda;
  const double twolambda = 2.0 * lambda;
  const double minlambda = -lambda;
  for (;;) {
    while (k == width - 1) {
      if (umin < 0.0) {
        do output(k0++) = vmin; while (k0 <= kminus);
        k = kminus = k0;
        vmin = input(k);
        umin = lambda;
        umax = vmin + umin - vmax;
      } else if (umax > 0.0) {
        do output(k0++) = vmax; while (k0 <= kplus);
        k = kplus = k0;
        vmax = input(k);
        umax = minlambda;
        umin = vmax + umax - vmin;
      } else {
        vmin += umin / static_cast<double>(k - k0 + 1);
        do output(k0++) = vmin; while (k0 <= k);
        return output;
      }
    }
    if ((umin += input(k + 1) - vmin) < minlambda) {
      do output(k0++) = vmin; while (k0 <= kminus);
      k = kplus = kminus = k0;
      vmin = input(k);
      vmax = vmin + twolambda;
      umin = lambda;
      umax = minlambda;
    } else if ((umax += input(k + 1) - vmax) > lambda) {
      do output(k0++) = vmax; while (k0 <= kplus);
      k = kplus = kminus = k0;
      vmax = input(k);
      vmin = vmax - twolambda;
      umin = lambda;
      umax = minlambda;
    } else {
      ++k;
      if (umin >= lambda) {
        kminus = k;
        vmin += (umin - lambda) / static_cast<double>(kminus - k0 + 1);
        umin = lambda;
      }
      if (umax <= minlambda) {
        kplus = k;
        vmax += (umax + lambda) / static_cast<double>(kplus - k0 + 1);
        umax = minlambda;
      }
    }
  }
}

Vector prox(const RegularizerSpec& reg, double tau, const Vector& x) {
  if (!(tau > 0.0)) throw InputError("prox: tau must be positive");
  require_dim(reg, x, "prox");
  switch (reg.kind()) {
    case RegKind::L1: {
      Vector out(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double a = std::abs(x(i));
        out(i) = a <= tau ? 0.0 : std::copysign(a - tau, x(i));
      }
      return out;
    }
    case RegKind::L12: {
      Vector out = Vector::Zero(x.size());
      for (const auto& g : reg.groups()) {
        const double n = group_slice(x, g).norm();
        if (n <= tau) continue;
        const double shrink = 1.0 - tau / n;
        for (auto i : g) out(i) = shrink * x(i);
      }
      return out;
    }
    case RegKind::TV1D:
      return tv1d_prox(x, tau);
    case RegKind::Nuclear: {
      Eigen::JacobiSVD<Matrix> svd(as_matrix(reg, x), Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vector& s = svd.singularValues();
      Matrix out = Matrix::Zero(static_cast<Eigen::Index>(reg.matrix_rows()),
                                static_cast<Eigen::Index>(reg.matrix_cols()));
      for (Eigen::Index i = 0; i < s.size() && s(i) > tau; ++i) {
        out.noalias() += (s(i) - tau) * svd.matrixU().col(i) * svd.matrixV().col(i).transpose();
      }
      return Eigen::Map<const Vector>(out.data(), out.size());
    }
  }
  return x;
}

ModelDescriptor model_descriptor(const RegularizerSpec& reg, const Vector& w, double tol) {
  require_dim(reg, w, "model_descriptor");
  if (tol < 0.0) throw InputError("model_descriptor: tol must be nonnegative");
  ModelDescriptor d;
  d.kind = reg.kind();
  switch (reg.kind()) {
    case RegKind::L1:
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (std::abs(w(i)) > tol) d.active.push_back(static_cast<std::size_t>(i));
      }
      break;
    case RegKind::L12:
      for (std::size_t g = 0; g < reg.groups().size(); ++g) {
        if (group_slice(w, reg.groups()[g]).norm() > tol) d.active.push_back(g);
      }
      break;
    case RegKind::TV1D: {
      const Vector dw = tv_differences(w);
      for (Eigen::Index i = 0; i < dw.size(); ++i) {
        if (std::abs(dw(i)) > tol) d.active.push_back(static_cast<std::size_t>(i));
      }
      break;
    }
    case RegKind::Nuclear: {
      Eigen::JacobiSVD<Matrix> svd(as_matrix(reg, w));
      const Vector& s = svd.singularValues();
      if (s.size() == 0 || s(0) == 0.0) break;
      const double cut = tol * s(0);
      for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cut) ++d.rank;
      }
      break;
    }
  }
  return d;
}

Matrix tangent_basis(const RegularizerSpec& reg, const ModelDescriptor& d) {
  if (d.kind != reg.kind()) throw InputError("tangent_basis: descriptor kind mismatch");
  const auto p = static_cast<Eigen::Index>(reg.dim());
  switch (reg.kind()) {
    case RegKind::L1: {
      Matrix b = Matrix::Zero(p, static_cast<Eigen::Index>(d.active.size()));
      for (std::size_t j = 0; j < d.active.size(); ++j) {
        if (d.active[j] >= reg.dim()) throw InputError("tangent_basis: index out of range");
        b(static_cast<Eigen::Index>(d.active[j]), static_cast<Eigen::Index>(j)) = 1.0;
      }
      return b;
    }
    case RegKind::L12: {
      IndexSet coords;
      for (auto g : d.active) {
        if (g >= reg.groups().size()) throw InputError("tangent_basis: group out of range");
        coords.insert(coords.end(), reg.groups()[g].begin(), reg.groups()[g].end());
      }
      std::sort(coords.begin(), coords.end());
      Matrix b = Matrix::Zero(p, static_cast<Eigen::Index>(coords.size()));
      for (std::size_t j = 0; j < coords.size(); ++j) {
        b(static_cast<Eigen::Index>(coords[j]), static_cast<Eigen::Index>(j)) = 1.0;
      }
      return b;
    }
    case RegKind::TV1D: {
      // Constant runs between consecutive jumps; a jump at i separates i and i+1.
      std::vector<std::pair<std::size_t, std::size_t>> runs;
      std::size_t start = 0;
      for (auto j : d.active) {
        if (j + 1 >= reg.dim()) throw InputError("tangent_basis: jump out of range");
        runs.emplace_back(start, j + 1);
        start = j + 1;
      }
      runs.emplace_back(start, reg.dim());
      Matrix b = Matrix::Zero(p, static_cast<Eigen::Index>(runs.size()));
      for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto [lo, hi] = runs[r];
        const double h = 1.0 / std::sqrt(static_cast<double>(hi - lo));
        for (auto i = lo; i < hi; ++i) {
          b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = h;
        }
      }
      return b;
    }
    case RegKind::Nuclear:
      break;
  }
  throw UnsupportedKind("tangent space of the nuclear norm manifold is curved");
}

DenseOperator tangent_projector(const RegularizerSpec& reg, const ModelDescriptor& d) {
  const Matrix b = tangent_basis(reg, d);
  if (b.cols() == 0) {
    const auto p = static_cast<Eigen::Index>(reg.dim());
    return DenseOperator(Matrix::Zero(p, p));
  }
  return DenseOperator(b * b.transpose());
}

Matrix riemannian_hessian(const RegularizerSpec& reg, const Vector& w, const ModelDescriptor& d) {
  require_dim(reg, w, "riemannian_hessian");
  if (!is_affine(reg.kind())) {
    throw UnsupportedKind("riemannian_hessian: nuclear norm manifold is not affine");
  }
  if (!(model_descriptor(reg, w, 0.0) == d)) {
    throw InputError("riemannian_hessian: w does not lie on the model of the descriptor");
  }
  const auto p = static_cast<Eigen::Index>(reg.dim());
  Matrix h = Matrix::Zero(p, p);
  if (reg.kind() != RegKind::L12) return h;

  for (auto gi : d.active) {
    const IndexSet& g = reg.groups()[gi];
    const Vector wg = group_slice(w, g);
    const double n = wg.norm();
    if (n < 1e-12) {
      throw SingularityError("riemannian_hessian: active group " + std::to_string(gi) +
                             " has vanishing norm");
    }
    const Vector u = wg / n;
    const auto gs = static_cast<Eigen::Index>(g.size());
    const Matrix block = (Matrix::Identity(gs, gs) - u * u.transpose()) / n;
    for (Eigen::Index a = 0; a < gs; ++a) {
      for (Eigen::Index b = 0; b < gs; ++b) {
        h(static_cast<Eigen::Index>(g[static_cast<std::size_t>(a)]),
          static_cast<Eigen::Index>(g[static_cast<std::size_t>(b)])) = block(a, b);
      }
    }
  }
  // Active groups are coordinate blocks of T, so the block matrix is already P_T H P_T.
  return h;
}

CertificateReport check_source_condition(const RegularizerSpec& reg, double alpha,
                                         const Vector& w_true, const DenseOperator& x,
                                         double tol_eq) {
  require_dim(reg, w_true, "check_source_condition");
  if (!(alpha > 0.0)) throw InputError("check_source_condition: alpha must be positive");
  if (x.cols() != reg.dim()) throw InputError("check_source_condition: operator width mismatch");
  if (w_true.isZero(0.0)) throw InputError("check_source_condition: w_true must be nonzero");

  const auto p = static_cast<Eigen::Index>(reg.dim());
  const ModelDescriptor d = model_descriptor(reg, w_true);

  // e is the on-model part of the subgradient of R at w_true; basis spans T.
  Vector e = Vector::Zero(p);
  Matrix basis;
  Matrix sv_u, sv_v;
  switch (reg.kind()) {
    case RegKind::L1:
      for (auto i : d.active) e(static_cast<Eigen::Index>(i)) = w_true(static_cast<Eigen::Index>(i)) > 0 ? 1.0 : -1.0;
      basis = tangent_basis(reg, d);
      break;
    case RegKind::L12:
      for (auto gi : d.active) {
        const IndexSet& g = reg.groups()[gi];
        const Vector wg = group_slice(w_true, g);
        const double n = wg.norm();
        for (std::size_t j = 0; j < g.size(); ++j) e(static_cast<Eigen::Index>(g[j])) = wg(static_cast<Eigen::Index>(j)) / n;
      }
      basis = tangent_basis(reg, d);
      break;
    case RegKind::TV1D: {
      const Vector dw = tv_differences(w_true);
      for (auto j : d.active) {
        const double s = dw(static_cast<Eigen::Index>(j)) > 0 ? 1.0 : -1.0;
        // D^T applied to s * e_j
        e(static_cast<Eigen::Index>(j)) -= s;
        e(static_cast<Eigen::Index>(j) + 1) += s;
      }
      basis = tangent_basis(reg, d);
      break;
    }
    case RegKind::Nuclear: {
      Eigen::JacobiSVD<Matrix> svd(as_matrix(reg, w_true), Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto r = static_cast<Eigen::Index>(d.rank);
      sv_u = svd.matrixU().leftCols(r);
      sv_v = svd.matrixV().leftCols(r);
      const Matrix uvt = sv_u * sv_v.transpose();
      e = Eigen::Map<const Vector>(uvt.data(), uvt.size());
      basis = nuclear_tangent_basis(sv_u, sv_v);
      break;
    }
  }

  CertificateReport rep;
  const Matrix xb = x.matrix() * basis;  // n x dim(T)
  const Vector rhs = -(basis.transpose() * (alpha * w_true + e));
  // Minimal-norm least-squares solution of (X B)^T v = rhs.
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xb.transpose());
  rep.certificate_dual = basis.cols() == 0 ? Vector::Zero(static_cast<Eigen::Index>(x.rows()))
                                           : Vector(cod.solve(rhs));
  rep.z = -x.apply_adjoint(rep.certificate_dual);
  rep.on_model_residual = (xb.transpose() * rep.certificate_dual - rhs).norm();

  // Off-model part of the candidate subgradient z - alpha w_true - e.
  const Vector rest = rep.z - alpha * w_true - e;
  double worst = 0.0;
  switch (reg.kind()) {
    case RegKind::L1: {
      std::vector<bool> on(static_cast<std::size_t>(p), false);
      for (auto i : d.active) on[i] = true;
      for (Eigen::Index i = 0; i < p; ++i) {
        if (!on[static_cast<std::size_t>(i)]) worst = std::max(worst, std::abs(rest(i)));
      }
      break;
    }
    case RegKind::L12: {
      std::vector<bool> on(reg.groups().size(), false);
      for (auto g : d.active) on[g] = true;
      for (std::size_t g = 0; g < reg.groups().size(); ++g) {
        if (!on[g]) worst = std::max(worst, group_slice(rest, reg.groups()[g]).norm());
      }
      break;
    }
    case RegKind::TV1D: {
      // Solve D_off^T q = rest for the dual variables of the non-jump differences.
      std::vector<bool> on(static_cast<std::size_t>(p - 1), false);
      for (auto j : d.active) on[j] = true;
      IndexSet off;
      for (std::size_t j = 0; j + 1 < reg.dim(); ++j) {
        if (!on[j]) off.push_back(j);
      }
      if (!off.empty()) {
        Matrix dt = Matrix::Zero(p, static_cast<Eigen::Index>(off.size()));
        for (std::size_t c = 0; c < off.size(); ++c) {
          const auto j = static_cast<Eigen::Index>(off[c]);
          dt(j, static_cast<Eigen::Index>(c)) = -1.0;
          dt(j + 1, static_cast<Eigen::Index>(c)) = 1.0;
        }
        const Vector q = dt.colPivHouseholderQr().solve(rest);
        worst = q.lpNorm<Eigen::Infinity>();
      }
      break;
    }
    case RegKind::Nuclear: {
      const Vector off = rest - basis * (basis.transpose() * rest);
      worst = spectral_norm(Matrix(as_matrix(reg, off)));
      break;
    }
  }
  rep.off_model_margin = 1.0 - worst;
  rep.nondegenerate = rep.on_model_residual <= tol_eq && rep.off_model_margin > 0.0;
  return rep;
}

}  // namespace itreg
