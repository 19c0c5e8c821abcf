#include "itreg/analysis.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "itreg/errors.hpp"

namespace itreg {

ConsistencyReport consistency_report(const Trace& trace, const ModelDescriptor& truth,
                                     const RegularizerSpec& reg, double tol) {
  if (trace.records.empty()) throw InputError("consistency_report: empty trace");
  if (truth.kind != reg.kind()) throw InputError("consistency_report: truth kind mismatch");

  const auto& recs = trace.records;
  std::vector<bool> same(recs.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    same[i] = model_descriptor(reg, recs[i].w, tol) == truth;
    if (recs[i].err_to_truth < recs[best].err_to_truth) best = i;
  }

  ConsistencyReport rep;
  rep.k_best = recs[best].k;
  rep.d_best = recs[best].err_to_truth;
  rep.consistent_at_best = same[best];
  if (same[best]) {
    std::size_t lo = best, hi = best;
    while (lo > 0 && same[lo - 1]) --lo;
    while (hi + 1 < recs.size() && same[hi + 1]) ++hi;
    rep.interval = KInterval{recs[lo].k, recs[hi].k};
  }
  return rep;
}

std::size_t first_record_in(const Trace& trace, const KInterval& interval) {
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    if (trace.records[i].k >= interval.first) return i;
  }
  throw InputError("first_record_in: interval lies beyond the trace");
}

LocalRateReport build_mdgd(const DenseOperator& x, const RegularizerSpec& reg,
                           const Vector& w_anchor, const ModelDescriptor& d, double alpha) {
  if (!is_affine(reg.kind())) {
    throw UnsupportedKind("rate analysis does not apply to the nuclear norm");
  }
  if (!(alpha > 0.0)) throw InputError("build_mdgd: alpha must be positive");
  if (x.cols() != reg.dim()) throw InputError("build_mdgd: operator width mismatch");

  const Matrix basis = tangent_basis(reg, d);
  const Matrix hess = riemannian_hessian(reg, w_anchor, d);
  const Eigen::Index m = basis.cols();
  const auto p = static_cast<Eigen::Index>(reg.dim());

  LocalRateReport rep;
  rep.x_norm = spectral_norm(x);
  rep.p_t = basis * basis.transpose();
  rep.w_t = rep.p_t + hess / alpha;
  if (m == 0) {
    rep.m = Matrix::Zero(p, p);
    rep.sigma_min_t = std::numeric_limits<double>::infinity();
    rep.inj_ok = true;
    return rep;
  }

  // Everything below lives in coordinates of the orthonormal basis of T.
  const Matrix w_r = Matrix::Identity(m, m) + basis.transpose() * hess * basis / alpha;
  const Matrix xb = x.matrix() * basis;
  const Matrix gram = xb.transpose() * xb;
  const Matrix m_r = Matrix::Identity(m, m) -
                     w_r.llt().solve(gram) / (rep.x_norm * rep.x_norm);
  rep.m = basis * m_r * basis.transpose();

  Eigen::EigenSolver<Matrix> eig(m_r, false);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto ev = eig.eigenvalues()(i);
    rep.rho = std::max(rep.rho, std::abs(ev));
    rep.max_imag = std::max(rep.max_imag, std::abs(ev.imag()));
  }

  if (m > xb.rows()) {
    rep.sigma_min_t = 0.0;
  } else {
    Eigen::JacobiSVD<Matrix> svd(xb);
    rep.sigma_min_t = svd.singularValues()(svd.singularValues().size() - 1);
  }
  rep.inj_ok = rep.sigma_min_t > 1e-8 * rep.x_norm;
  return rep;
}

double fit_rate(const Trace& trace, LocalRateReport& report, const KInterval& interval,
                double truth_norm) {
  std::size_t inside = 0;
  for (const auto& r : trace.records) {
    if (r.k >= interval.first && r.k <= interval.second) ++inside;
  }
  if (inside < 4) {
    throw InsufficientData("fit_rate: interval holds " + std::to_string(inside) +
                           " recorded iterates, need at least 4");
  }
  const double floor = kStagnationFloor * (1.0 + truth_norm);
  std::vector<double> ks, logs;
  for (const auto& r : trace.records) {
    if (r.k <= interval.first || r.k > interval.second) continue;
    if (!std::isfinite(r.step_diff)) continue;
    if (r.step_diff < floor) break;
    ks.push_back(static_cast<double>(r.k));
    logs.push_back(std::log(r.step_diff));
  }
  if (ks.size() < 2) throw InsufficientData("fit_rate: fewer than two points above the floor");

  double mk = 0, ml = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    mk += ks[i];
    ml += logs[i];
  }
  mk /= static_cast<double>(ks.size());
  ml /= static_cast<double>(ks.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    sxy += (ks[i] - mk) * (logs[i] - ml);
    sxx += (ks[i] - mk) * (ks[i] - mk);
  }
  report.fitted_slope = sxy / sxx;
  report.window = KInterval{static_cast<std::size_t>(ks.front()),
                            static_cast<std::size_t>(ks.back())};
  return report.fitted_slope;
}

bool rate_contract_holds(const LocalRateReport& report, double slack) {
  return report.fitted_slope <= std::log(report.rho) + slack;
}

EnvelopeResult error_envelope_check(const Trace& trace, const LocalRateReport& report,
                                    std::size_t k_best, double d_best, const KInterval& interval,
                                    double truth_norm) {
  const double rho = report.rho;
  if (!(rho < 1.0)) throw NotApplicable("error_envelope_check: spectral radius is not below 1");
  if (k_best < interval.first || k_best > interval.second) {
    throw InputError("error_envelope_check: k_best outside the interval");
  }
  const double floor = kStagnationFloor * (1.0 + truth_norm);
  const double log_rho = std::log(rho);

  EnvelopeResult res;
  for (const auto& r : trace.records) {
    if (r.k < interval.first || r.k > interval.second) continue;
    ++res.checked;
    const double excess = r.err_to_truth - d_best;
    if (excess <= floor) continue;
    const double lead = static_cast<double>(std::min(r.k, k_best) - interval.first);
    const double gap = r.k > k_best ? static_cast<double>(r.k - k_best)
                                    : static_cast<double>(k_best - r.k);
    // log of rho^lead (1 - rho^gap) / (1 - rho)
    double log_shape = std::log1p(-std::pow(rho, gap)) - std::log1p(-rho);
    if (lead > 0) log_shape += rho > 0.0 ? lead * log_rho : -std::numeric_limits<double>::infinity();
    res.d_const = std::max(res.d_const, std::exp(std::log(excess) - log_shape));
  }
  res.holds = std::isfinite(res.d_const);
  return res;
}

LinearizationCheck linearization_residual(const Trace& trace, const LocalRateReport& report,
                                          const KInterval& interval, std::size_t max_triples,
                                          double min_step) {
  LinearizationCheck out;
  const auto& recs = trace.records;
  for (std::size_t i = 1; i + 1 < recs.size(); ++i) {
    const auto& a = recs[i - 1];
    const auto& b = recs[i];
    const auto& c = recs[i + 1];
    if (a.k < interval.first || c.k > interval.second) continue;
    if (b.k != a.k + 1 || c.k != b.k + 1) {
      throw InputError("linearization_residual: needs consecutive records");
    }
    const Vector prev = b.w - a.w;
    const Vector next = c.w - b.w;
    if (prev.norm() < min_step || next.norm() < min_step) break;
    const double res = (next - report.m * prev).norm();
    out.max_absolute = std::max(out.max_absolute, res);
    out.max_relative = std::max(out.max_relative, res / prev.norm());
    if (++out.triples == max_triples) break;
  }
  return out;
}

}  // namespace itreg
