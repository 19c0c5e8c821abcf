#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "itreg/problem.hpp"

namespace itreg {

enum class Method { DGD, ADGD, ODE };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct SolverConfig {
  double alpha = 0.01;
  double gamma = 0.0;  // <= alpha / |X|^2
  double theta = 5.0;  // ADGD inertia, > 2
  std::size_t max_iters = 1000;
  std::size_t record_every = 1;
  double ode_step = 0.0;  // 0 selects gamma

  // gamma = alpha / |X|^2, ode_step = gamma.
  static SolverConfig standard(const DenseOperator& x, double alpha, std::size_t max_iters);
};

inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

struct IterateRecord {
  std::size_t k = 0;
  double t = 0.0;  // k * gamma for the discrete methods, k * ode_step for the flow
  Vector w;
  Vector v;  // v^(k) for DGD and the flow, u^(k) for ADGD
  Vector z;  // -X^T v
  double err_to_truth = 0.0;
  double residual = 0.0;
  double step_diff = kAbsent;  // |w^(k) - w^(k-1)|, absent at k = 0
  double dual_objective = 0.0;
};

struct Trace {
  std::vector<IterateRecord> records;
  SolverConfig config;
  Method method = Method::DGD;
  std::string problem_id;
};

// Called on every recorded iterate; returning false ends the run after that
// record.
using RecordObserver = std::function<bool(const IterateRecord&)>;

// Fenchel dual objective phi(v) = R_alpha^*(-X^T v) + <y_noisy, v>,
// R_alpha = R + alpha/2 |.|^2.
double dual_objective(const ProblemInstance& problem, const RegularizerSpec& reg, double alpha,
                      const Vector& v);

// Gradient of the conjugate, prox_{R/alpha}(x/alpha).
Vector conjugate_gradient_map(const RegularizerSpec& reg, double alpha, const Vector& x);

Trace dgd_run(const ProblemInstance& problem, const RegularizerSpec& reg, const SolverConfig& cfg,
              const RecordObserver& observer = {});
Trace adgd_run(const ProblemInstance& problem, const RegularizerSpec& reg, const SolverConfig& cfg,
               const RecordObserver& observer = {});
// Classical RK4 on dv/dt = X prox(-X^T v / alpha) - y_noisy; horizon <= 0
// selects max_iters * ode_step.
Trace ode_run(const ProblemInstance& problem, const RegularizerSpec& reg, const SolverConfig& cfg,
              double horizon = 0.0, const RecordObserver& observer = {});

Trace run_method(Method m, const ProblemInstance& problem, const RegularizerSpec& reg,
                 const SolverConfig& cfg, const RecordObserver& observer = {});

// DGD: floor(c / delta) (needs c >= delta); ADGD: ceil(c / sqrt(delta)).
std::size_t stopping_schedule(double delta, double c, Method m);

struct NoiselessSolution {
  Vector w_limit;
  Vector v_limit;
  std::size_t iterations = 0;
};

// DGD on y_clean until |v^(k+1) - v^(k)| <= tol (1 + |v^(k)|).
NoiselessSolution solve_noiseless(const ProblemInstance& problem, const RegularizerSpec& reg,
                                  double alpha, double tol, std::size_t max_iters);

}  // namespace itreg
