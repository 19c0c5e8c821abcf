#include "itreg/solvers.hpp"

#include <cmath>
#include <string>

#include "itreg/errors.hpp"

namespace itreg {
namespace {

constexpr double kDivergenceFactor = 1e12;

void validate(const ProblemInstance& problem, const RegularizerSpec& reg, const SolverConfig& cfg,
              bool check_theta) {
  if (problem.x.cols() != reg.dim()) throw InputError("solver: operator width != regularizer dim");
  if (static_cast<std::size_t>(problem.y_noisy.size()) != problem.x.rows()) {
    throw InputError("solver: observation length != operator height");
  }
  if (!(cfg.alpha > 0.0)) throw InputError("solver: alpha must be positive");
  if (!(cfg.gamma > 0.0)) throw InputError("solver: gamma must be positive");
  if (cfg.record_every == 0) throw InputError("solver: record_every must be positive");
  const double xn = spectral_norm(problem.x);
  const double gmax = cfg.alpha / (xn * xn);
  if (cfg.gamma > gmax * (1.0 + 1e-12) + 1e-12) {
    throw InputError("solver: gamma exceeds alpha / |X|^2");
  }
  if (check_theta && !(cfg.theta > 2.0)) throw InputError("solver: theta must exceed 2");
}

// Primal map v -> (z, w) shared by all dynamics.
struct PrimalMap {
  const ProblemInstance& problem;
  const RegularizerSpec& reg;
  double alpha;

  void operator()(const Vector& v, Vector& z, Vector& w) const {
    z = -(problem.x.matrix().transpose() * v);
    w = prox(reg, 1.0 / alpha, z / alpha);
  }
};

struct Recorder {
  const ProblemInstance& problem;
  const RegularizerSpec& reg;
  const SolverConfig& cfg;
  const RecordObserver& observer;
  Trace& trace;

  // Returns false when the observer asks to stop.
  bool push(std::size_t k, double t, const Vector& w, const Vector& v, const Vector& z,
            double step_diff, bool force) {
    if (!force && k % cfg.record_every != 0) return true;
    IterateRecord rec;
    rec.k = k;
    rec.t = t;
    rec.w = w;
    rec.v = v;
    rec.z = z;
    rec.err_to_truth = (w - problem.w_true).norm();
    rec.residual = (problem.x.matrix() * w - problem.y_noisy).norm();
    rec.step_diff = step_diff;
    rec.dual_objective = z.dot(w) - value(reg, w) - 0.5 * cfg.alpha * w.squaredNorm() +
                         problem.y_noisy.dot(v);
    trace.records.push_back(std::move(rec));
    return observer ? observer(trace.records.back()) : true;
  }
};

void guard(const Vector& v, double y_norm, std::size_t k) {
  if (!v.allFinite() || v.norm() > kDivergenceFactor * (1.0 + y_norm)) {
    throw DivergenceError(k, "solver diverged at iteration " + std::to_string(k));
  }
}

std::size_t snap_integer(double x, bool up) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-12 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(up ? std::ceil(x) : std::floor(x));
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::DGD: return "dgd";
    case Method::ADGD: return "adgd";
    case Method::ODE: return "ode";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  if (name == "dgd") return Method::DGD;
  if (name == "adgd") return Method::ADGD;
  if (name == "ode") return Method::ODE;
  throw InputError("unknown method '" + std::string(name) + "'");
}

SolverConfig SolverConfig::standard(const DenseOperator& x, double alpha, std::size_t max_iters) {
  if (!(alpha > 0.0)) throw InputError("SolverConfig: alpha must be positive");
  const double xn = spectral_norm(x);
  SolverConfig cfg;
  cfg.alpha = alpha;
  cfg.gamma = alpha / (xn * xn);
  cfg.ode_step = cfg.gamma;
  cfg.max_iters = max_iters;
  return cfg;
}

Vector conjugate_gradient_map(const RegularizerSpec& reg, double alpha, const Vector& x) {
  return prox(reg, 1.0 / alpha, x / alpha);
}

double dual_objective(const ProblemInstance& problem, const RegularizerSpec& reg, double alpha,
                      const Vector& v) {
  if (!(alpha > 0.0)) throw InputError("dual_objective: alpha must be positive");
  const Vector z = -problem.x.apply_adjoint(v);
  const Vector w = conjugate_gradient_map(reg, alpha, z);
  // R_alpha^*(z) = <z, w> - R(w) - alpha/2 |w|^2 at the maximizer w.
  return z.dot(w) - value(reg, w) - 0.5 * alpha * w.squaredNorm() + problem.y_noisy.dot(v);
}

Trace dgd_run(const ProblemInstance& problem, const RegularizerSpec& reg, const SolverConfig& cfg,
              const RecordObserver& observer) {
  validate(problem, reg, cfg, false);
  Trace trace{{}, cfg, Method::DGD, problem.id};
  Recorder rec{problem, reg, cfg, observer, trace};
  const PrimalMap primal{problem, reg, cfg.alpha};
  const Matrix& x = problem.x.matrix();
  const double y_norm = problem.y_noisy.norm();

  Vector v = Vector::Zero(static_cast<Eigen::Index>(problem.x.rows()));
  Vector z, w, w_prev;
  for (std::size_t k = 0;; ++k) {
    primal(v, z, w);
    const double step = k == 0 ? kAbsent : (w - w_prev).norm();
    const bool last = k == cfg.max_iters;
    if (!rec.push(k, static_cast<double>(k) * cfg.gamma, w, v, z, step, last)) break;
    if (last) break;
    v.noalias() += cfg.gamma * (x * w - problem.y_noisy);
    guard(v, y_norm, k + 1);
    w_prev.swap(w);
  }
  return trace;
}

Trace adgd_run(const ProblemInstance& problem, const RegularizerSpec& reg, const SolverConfig& cfg,
               const RecordObserver& observer) {
  validate(problem, reg, cfg, true);
  Trace trace{{}, cfg, Method::ADGD, problem.id};
  Recorder rec{problem, reg, cfg, observer, trace};
  const PrimalMap primal{problem, reg, cfg.alpha};
  const Matrix& x = problem.x.matrix();
  const double y_norm = problem.y_noisy.norm();

  const auto n = static_cast<Eigen::Index>(problem.x.rows());
  Vector v = Vector::Zero(n);
  Vector u_prev = Vector::Zero(n);  // u^(k-1)
  Vector u, zr, r, z, w, w_prev;
  for (std::size_t k = 0;; ++k) {
    primal(v, zr, r);
    u = v + cfg.gamma * (x * r - problem.y_noisy);
    guard(u, y_norm, k);
    primal(u, z, w);
    const double step = k == 0 ? kAbsent : (w - w_prev).norm();
    const bool last = k == cfg.max_iters;
    if (!rec.push(k, static_cast<double>(k) * cfg.gamma, w, u, z, step, last)) break;
    if (last) break;
    const double kd = static_cast<double>(k);
    const double inertia = (kd - 1.0) / (kd + cfg.theta);
    v = u + inertia * (u - u_prev);
    u_prev.swap(u);
    w_prev.swap(w);
  }
  return trace;
}

Trace ode_run(const ProblemInstance& problem, const RegularizerSpec& reg, const SolverConfig& cfg,
              double horizon, const RecordObserver& observer) {
  validate(problem, reg, cfg, false);
  const double h = cfg.ode_step > 0.0 ? cfg.ode_step : cfg.gamma;
  if (horizon <= 0.0) horizon = static_cast<double>(cfg.max_iters) * h;
  const std::size_t steps = snap_integer(horizon / h, true);

  Trace trace{{}, cfg, Method::ODE, problem.id};
  trace.config.ode_step = h;
  Recorder rec{problem, reg, trace.config, observer, trace};
  const PrimalMap primal{problem, reg, cfg.alpha};
  const Matrix& x = problem.x.matrix();
  const double y_norm = problem.y_noisy.norm();

  Vector zt, wt;
  auto field = [&](const Vector& v) -> Vector {
    primal(v, zt, wt);
    return x * wt - problem.y_noisy;
  };

  Vector v = Vector::Zero(static_cast<Eigen::Index>(problem.x.rows()));
  Vector z, w, w_prev;
  for (std::size_t k = 0;; ++k) {
    primal(v, z, w);
    const double step = k == 0 ? kAbsent : (w - w_prev).norm();
    const bool last = k == steps;
    if (!rec.push(k, static_cast<double>(k) * h, w, v, z, step, last)) break;
    if (last) break;
    const Vector k1 = field(v);
    const Vector k2 = field(v + 0.5 * h * k1);
    const Vector k3 = field(v + 0.5 * h * k2);
    const Vector k4 = field(v + h * k3);
    v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    guard(v, y_norm, k + 1);
    w_prev.swap(w);
  }
  return trace;
}

Trace run_method(Method m, const ProblemInstance& problem, const RegularizerSpec& reg,
                 const SolverConfig& cfg, const RecordObserver& observer) {
  switch (m) {
    case Method::DGD: return dgd_run(problem, reg, cfg, observer);
    case Method::ADGD: return adgd_run(problem, reg, cfg, observer);
    case Method::ODE: return ode_run(problem, reg, cfg, 0.0, observer);
  }
  throw InputError("run_method: unknown method");
}

std::size_t stopping_schedule(double delta, double c, Method m) {
  if (!(delta > 0.0) || !(c > 0.0)) throw InputError("stopping_schedule: delta and c must be positive");
  switch (m) {
    case Method::DGD:
      if (c < delta) throw InputError("stopping_schedule: DGD needs c >= delta");
      return snap_integer(c / delta, false);
    case Method::ADGD:
      return snap_integer(c / std::sqrt(delta), true);
    case Method::ODE:
      break;
  }
  throw InputError("stopping_schedule: no schedule for the continuous flow");
}

NoiselessSolution solve_noiseless(const ProblemInstance& problem, const RegularizerSpec& reg,
                                  double alpha, double tol, std::size_t max_iters) {
  if (problem.x.cols() != reg.dim()) throw InputError("solve_noiseless: dimension mismatch");
  if (!(tol > 0.0)) throw InputError("solve_noiseless: tol must be positive");
  const SolverConfig cfg = SolverConfig::standard(problem.x, alpha, max_iters);
  const PrimalMap primal{problem, reg, alpha};
  const Matrix& x = problem.x.matrix();

  Vector v = Vector::Zero(static_cast<Eigen::Index>(problem.x.rows()));
  Vector z, w, v_next;
  double last = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < max_iters; ++k) {
    primal(v, z, w);
    v_next = v + cfg.gamma * (x * w - problem.y_clean);
    guard(v_next, problem.y_clean.norm(), k + 1);
    last = (v_next - v).norm();
    const bool done = last <= tol * (1.0 + v.norm());
    v.swap(v_next);
    if (done) {
      primal(v, z, w);
      return {w, v, k + 1};
    }
  }
  throw ConvergenceFailure(last, "solve_noiseless: no convergence within " +
                                     std::to_string(max_iters) + " iterations");
}

}  // namespace itreg
