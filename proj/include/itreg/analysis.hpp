#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include "itreg/solvers.hpp"

namespace itreg {

using KInterval = std::pair<std::size_t, std::size_t>;  // inclusive [k_lo, k_hi]

struct ConsistencyReport {
  std::size_t k_best = 0;  // argmin of err_to_truth, smallest k on ties
  double d_best = 0.0;
  std::optional<KInterval> interval;  // maximal consistent run containing k_best
  bool consistent_at_best = false;
};

ConsistencyReport consistency_report(const Trace& trace, const ModelDescriptor& truth,
                                     const RegularizerSpec& reg, double tol);

// Index of the first record with descriptor equal to truth inside interval.
std::size_t first_record_in(const Trace& trace, const KInterval& interval);

struct LocalRateReport {
  Matrix p_t;  // projector onto T
  Matrix m;    // one-step linearized map on T (p x p)
  Matrix w_t;  // P_T + H / alpha
  double rho = 0.0;
  double max_imag = 0.0;  // largest |Im| among eigenvalues of M on T
  double sigma_min_t = 0.0;
  bool inj_ok = false;
  double x_norm = 0.0;
  double fitted_slope = 0.0;
  std::optional<KInterval> window;  // records used by the last fit
};

LocalRateReport build_mdgd(const DenseOperator& x, const RegularizerSpec& reg,
                           const Vector& w_anchor, const ModelDescriptor& d, double alpha);

// Records with step_diff below floor_scale * (1 + |w_true|) are treated as
// stagnated.
inline constexpr double kStagnationFloor = 1e-13;

// Steps smaller than this (relative to 1 + |w_true|) are dominated by rounding
// in the linearization residual.
inline constexpr double kLinearizationFloor = 1e-3;

// Triples checked after the anchor when the model is curved.
inline constexpr std::size_t kNearAnchorTriples = 20;

// Least-squares slope of log(step_diff) against k over records with
// k_lo < k <= k_hi above the floor. Stores slope and window in report.
double fit_rate(const Trace& trace, LocalRateReport& report, const KInterval& interval,
                double truth_norm);

// fitted_slope <= log(rho) + slack.
bool rate_contract_holds(const LocalRateReport& report, double slack = 0.05);

struct EnvelopeResult {
  bool holds = false;
  double d_const = 0.0;  // smallest D valid over the checked records
  std::size_t checked = 0;
};

// err(k) <= d_best + D rho^{min(k,k_best)-k_lo} (1 - rho^{|k-k_best|}) / (1 - rho)
// over the interval; excesses below the stagnation floor are skipped.
EnvelopeResult error_envelope_check(const Trace& trace, const LocalRateReport& report,
                                    std::size_t k_best, double d_best, const KInterval& interval,
                                    double truth_norm);

// Largest |(w^(k+1)-w^(k)) - M (w^(k)-w^(k-1))| / |w^(k+1)-w^(k)| over
// consecutive recorded triples strictly inside the interval. Requires
// record_every == 1.
struct LinearizationCheck {
  double max_relative = 0.0;
  double max_absolute = 0.0;
  std::size_t triples = 0;
};
LinearizationCheck linearization_residual(const Trace& trace, const LocalRateReport& report,
                                          const KInterval& interval, std::size_t max_triples = 0,
                                          double min_step = 0.0);

}  // namespace itreg
