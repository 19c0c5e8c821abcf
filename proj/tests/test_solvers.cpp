#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "itreg/errors.hpp"
#include "itreg/solvers.hpp"
#include "oracles.hpp"

namespace itreg {
namespace {

ProblemInstance make_problem(const Matrix& x, const Vector& w_true, const Vector& y_noisy,
                             const RegularizerSpec& reg) {
  DenseOperator op(x);
  const Vector y_clean = op.apply(w_true);
  return ProblemInstance{op,  w_true, y_clean, y_noisy, (y_noisy - y_clean).norm(),
                         std::numeric_limits<double>::infinity(), 0, reg, "test"};
}

ProblemInstance scalar_problem() {
  return make_problem(Matrix::Ones(1, 1), Vector::Constant(1, 2.0), Vector::Constant(1, 2.0),
                      RegularizerSpec::l1(1));
}

SolverConfig scalar_config(std::size_t iters) {
  SolverConfig cfg;
  cfg.alpha = 1.0;
  cfg.gamma = 1.0;
  cfg.max_iters = iters;
  return cfg;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = g(rng) / std::sqrt(double(rows));
  return a;
}

// Sparse L1 instance with optional noise of norm delta.
ProblemInstance sparse_problem(std::uint64_t seed, Eigen::Index n, Eigen::Index p, int s,
                               double delta) {
  std::mt19937_64 rng(seed);
  const Matrix x = gaussian(n, p, rng);
  std::normal_distribution<double> g;
  Vector w = Vector::Zero(p);
  for (int i = 0; i < s; ++i) w(static_cast<Eigen::Index>((7 * i + seed) % p)) = g(rng);
  Vector noise(n);
  for (Eigen::Index i = 0; i < n; ++i) noise(i) = g(rng);
  const Vector y = x * w + delta * noise / noise.norm();
  return make_problem(x, w, y, RegularizerSpec::l1(static_cast<std::size_t>(p)));
}

TEST(Dgd, ScalarInstance) {
  const Trace tr = dgd_run(scalar_problem(), RegularizerSpec::l1(1), scalar_config(5));
  ASSERT_EQ(tr.records.size(), 6u);
  const double v[] = {0, -2, -3, -3, -3, -3};
  const double w[] = {0, 1, 2, 2, 2, 2};
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(tr.records[k].k, k);
    EXPECT_EQ(tr.records[k].v(0), v[k]);
    EXPECT_EQ(tr.records[k].w(0), w[k]);
    EXPECT_EQ(tr.records[k].z(0), -v[k]);
  }
  // -v = 3 lies in the subdifferential of |w| + w^2 / 2 at w = 2.
  EXPECT_EQ(-tr.records.back().v(0), 1.0 + 2.0);
  EXPECT_TRUE(std::isnan(tr.records[0].step_diff));
  EXPECT_EQ(tr.records[1].step_diff, 1.0);
  EXPECT_EQ(tr.method, Method::DGD);
}

TEST(Dgd, ZeroObservationStaysAtOrigin) {
  std::mt19937_64 rng(1);
  const Matrix x = gaussian(6, 12, rng);
  const RegularizerSpec regs[] = {RegularizerSpec::l1(12), RegularizerSpec::l12_uniform(12, 3),
                                  RegularizerSpec::tv1d(12), RegularizerSpec::nuclear(3, 4)};
  for (const auto& reg : regs) {
    const auto prob = make_problem(x, Vector::Zero(12), Vector::Zero(6), reg);
    const auto cfg = SolverConfig::standard(prob.x, 0.1, 50);
    for (const Trace& tr : {dgd_run(prob, reg, cfg), adgd_run(prob, reg, cfg), ode_run(prob, reg, cfg)}) {
      for (const auto& r : tr.records) {
        EXPECT_EQ(r.w.norm(), 0.0);
        EXPECT_EQ(r.v.norm(), 0.0);
      }
    }
  }
}

TEST(Dgd, NoiselessLimitMatchesConstrainedMinimizer) {
  const auto prob = sparse_problem(3, 10, 30, 2, 0.0);
  const double alpha = 1.0;
  auto cfg = SolverConfig::standard(prob.x, alpha, 200000);
  cfg.record_every = 2000;
  const Trace tr = dgd_run(prob, prob.reg, cfg);
  for (std::size_t i = 1; i < tr.records.size(); ++i) {
    EXPECT_LE(tr.records[i].residual, tr.records[i - 1].residual + 1e-14);
  }
  EXPECT_LE(tr.records.back().residual, 1e-8);
  const Vector ref = oracle::constrained_l1_minimizer(prob.x.matrix(), prob.y_clean, alpha);
  EXPECT_LE((tr.records.back().w - ref).lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(Dgd, RecordThinningKeepsLast) {
  auto cfg = scalar_config(10);
  cfg.record_every = 3;
  const Trace tr = dgd_run(scalar_problem(), RegularizerSpec::l1(1), cfg);
  std::vector<std::size_t> ks;
  for (const auto& r : tr.records) ks.push_back(r.k);
  EXPECT_EQ(ks, (std::vector<std::size_t>{0, 3, 6, 9, 10}));

  const Trace empty = dgd_run(scalar_problem(), RegularizerSpec::l1(1), scalar_config(0));
  ASSERT_EQ(empty.records.size(), 1u);
  EXPECT_EQ(empty.records[0].w(0), 0.0);
}

TEST(Dgd, ObserverStopsRun) {
  std::size_t seen = 0;
  const Trace tr = dgd_run(scalar_problem(), RegularizerSpec::l1(1), scalar_config(100),
                           [&](const IterateRecord& r) { ++seen; return r.k < 4; });
  EXPECT_EQ(seen, 5u);
  EXPECT_EQ(tr.records.back().k, 4u);
}

TEST(Dgd, ConfigValidation) {
  const auto prob = scalar_problem();
  auto cfg = scalar_config(3);
  cfg.gamma = 1.01;
  EXPECT_THROW(dgd_run(prob, prob.reg, cfg), InputError);
  cfg = scalar_config(3);
  cfg.alpha = 0.0;
  EXPECT_THROW(dgd_run(prob, prob.reg, cfg), InputError);
  cfg = scalar_config(3);
  cfg.record_every = 0;
  EXPECT_THROW(dgd_run(prob, prob.reg, cfg), InputError);
  cfg = scalar_config(3);
  cfg.theta = 2.0;
  EXPECT_NO_THROW(dgd_run(prob, prob.reg, cfg));
  EXPECT_THROW(adgd_run(prob, prob.reg, cfg), InputError);
  EXPECT_THROW(dgd_run(prob, RegularizerSpec::l1(2), scalar_config(3)), InputError);
}

TEST(Dgd, NonFiniteIterateRaisesDivergence) {
  auto prob = scalar_problem();
  prob.y_noisy(0) = std::numeric_limits<double>::infinity();
  try {
    dgd_run(prob, prob.reg, scalar_config(5));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.iteration(), 1u);
  }
  EXPECT_THROW(adgd_run(prob, prob.reg, scalar_config(5)), DivergenceError);
  EXPECT_THROW(ode_run(prob, prob.reg, scalar_config(5)), DivergenceError);
}

TEST(Adgd, VanishingInertiaMatchesDgdShifted) {
  const auto prob = sparse_problem(5, 20, 60, 3, 0.05);
  auto cfg = SolverConfig::standard(prob.x, 0.05, 51);
  const Trace dgd = dgd_run(prob, prob.reg, cfg);
  cfg.theta = 1e12;
  const Trace adgd = adgd_run(prob, prob.reg, cfg);
  // u^(k) of the accelerated scheme is v^(k+1) of plain descent.
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_LE((adgd.records[k].v - dgd.records[k + 1].v).norm(), 1e-9);
    EXPECT_LE((adgd.records[k].w - dgd.records[k + 1].w).norm(), 1e-9);
  }
}

TEST(Adgd, SecondStepHasNoMomentum) {
  const auto prob = sparse_problem(6, 15, 40, 2, 0.01);
  const auto cfg = SolverConfig::standard(prob.x, 0.1, 3);
  const Trace tr = adgd_run(prob, prob.reg, cfg);
  const Vector u1 = tr.records[1].v;
  const Vector r2 = conjugate_gradient_map(prob.reg, cfg.alpha, -prob.x.apply_adjoint(u1));
  const Vector u2 = u1 + cfg.gamma * (prob.x.apply(r2) - prob.y_noisy);
  EXPECT_EQ(tr.records[2].v, u2);
  EXPECT_EQ(tr.method, Method::ADGD);
}

TEST(Ode, InactiveRegionFlowIsLinear) {
  std::mt19937_64 rng(4);
  const Matrix x = gaussian(8, 20, rng);
  Vector y = Vector::Ones(8) * 0.1;
  const auto prob = make_problem(x, Vector::Zero(20), y, RegularizerSpec::l1(20));
  const double alpha = 1.0;
  const auto cfg = SolverConfig::standard(prob.x, alpha, 10);
  // prox stays at zero while |X^T y| t < alpha.
  const double t_end = 10 * cfg.gamma;
  ASSERT_LT((x.transpose() * y).lpNorm<Eigen::Infinity>() * t_end, alpha);
  const Trace tr = ode_run(prob, prob.reg, cfg);
  ASSERT_EQ(tr.records.size(), 11u);
  for (const auto& r : tr.records) {
    EXPECT_NEAR(r.t, static_cast<double>(r.k) * cfg.gamma, 1e-15);
    EXPECT_LE((r.v + y * r.t).norm(), 1e-12);
    EXPECT_EQ(r.w.norm(), 0.0);
  }
}

TEST(Ode, HorizonAndStep) {
  const auto prob = scalar_problem();
  auto cfg = scalar_config(4);
  cfg.gamma = 0.5;
  cfg.ode_step = 0.25;
  const Trace tr = ode_run(prob, prob.reg, cfg, 2.0);
  EXPECT_EQ(tr.records.back().k, 8u);
  EXPECT_DOUBLE_EQ(tr.records.back().t, 2.0);
  EXPECT_EQ(tr.method, Method::ODE);
}

TEST(DualObjective, Examples) {
  std::mt19937_64 rng(9);
  const Matrix x = gaussian(4, 6, rng);
  const RegularizerSpec regs[] = {RegularizerSpec::l1(6), RegularizerSpec::l12_uniform(6, 2),
                                  RegularizerSpec::tv1d(6), RegularizerSpec::nuclear(2, 3)};
  for (const auto& reg : regs) {
    const auto prob = make_problem(x, Vector::Ones(6), Vector::Ones(4), reg);
    EXPECT_EQ(dual_objective(prob, reg, 0.3, Vector::Zero(4)), 0.0);
  }

  // sup_w 3 w - |w| - w^2 / 2 by dense scan, then add <y, v> = -6.
  double sup = -std::numeric_limits<double>::infinity();
  for (int i = -200000; i <= 200000; ++i) {
    const double w = i * 1e-4;
    sup = std::max(sup, 3 * w - std::abs(w) - 0.5 * w * w);
  }
  const double expected = sup - 6.0;
  EXPECT_NEAR(expected, -4.0, 1e-8);
  EXPECT_NEAR(dual_objective(scalar_problem(), RegularizerSpec::l1(1), 1.0, Vector::Constant(1, -3.0)),
              expected, 1e-8);
}

TEST(DualObjective, GradientMatchesSolverField) {
  const auto prob = sparse_problem(10, 12, 30, 3, 0.1);
  const double alpha = 0.2;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (int t = 0; t < 5; ++t) {
    Vector v(12);
    for (Eigen::Index i = 0; i < 12; ++i) v(i) = g(rng);
    const Vector w = conjugate_gradient_map(prob.reg, alpha, -prob.x.apply_adjoint(v));
    const Vector grad = -prob.x.apply(w) + prob.y_noisy;
    auto phi = [&](const Vector& u) { return dual_objective(prob, prob.reg, alpha, u); };
    for (Eigen::Index i = 0; i < 12; ++i) {
      EXPECT_NEAR(oracle::central_difference(phi, v, i, 1e-6), grad(i), 1e-6);
    }
  }
}

TEST(DgdProperty, DualDescentAndSubgradient) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  const RegularizerSpec regs[] = {RegularizerSpec::l1(24), RegularizerSpec::l12_uniform(24, 4),
                                  RegularizerSpec::tv1d(24), RegularizerSpec::nuclear(4, 6)};
  for (int seed = 0; seed < 3; ++seed) {
    for (const auto& reg : regs) {
      const Matrix x = gaussian(10, 24, rng);
      Vector w(24);
      for (Eigen::Index i = 0; i < 24; ++i) w(i) = i % 5 == 0 ? g(rng) : 0.0;
      const auto prob = make_problem(x, w, x * w, reg);
      const double alpha = 0.05;
      const auto cfg = SolverConfig::standard(prob.x, alpha, 300);
      const Trace tr = dgd_run(prob, reg, cfg);
      for (std::size_t i = 1; i < tr.records.size(); ++i) {
        EXPECT_LE(tr.records[i].dual_objective, tr.records[i - 1].dual_objective + 1e-12);
      }
      for (std::size_t i : {std::size_t{5}, std::size_t{100}, tr.records.size() - 1}) {
        const auto& r = tr.records[i];
        EXPECT_LE((r.z + prob.x.apply_adjoint(r.v)).norm(), 1e-12);
        const double rw = value(reg, r.w) + 0.5 * alpha * r.w.squaredNorm();
        for (int probe = 0; probe < 50; ++probe) {
          Vector u(24);
          for (Eigen::Index j = 0; j < 24; ++j) u(j) = r.w(j) + g(rng);
          const double ru = value(reg, u) + 0.5 * alpha * u.squaredNorm();
          EXPECT_GE(ru - rw - r.z.dot(u - r.w), -1e-8);
        }
      }
    }
  }
}

TEST(DgdProperty, NoiseCouplingBound) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto noisy = sparse_problem(100 + seed, 30, 90, 3, 0.05);
    auto clean = noisy;
    clean.y_noisy = clean.y_clean;
    const auto cfg = SolverConfig::standard(noisy.x, 0.01, 500);
    const Trace a = dgd_run(noisy, noisy.reg, cfg);
    const Trace b = dgd_run(clean, clean.reg, cfg);
    for (std::size_t k = 0; k <= 500; ++k) {
      EXPECT_LE((a.records[k].v - b.records[k].v).norm(),
                cfg.gamma * static_cast<double>(k) * noisy.noise_norm + 1e-9);
    }
  }
}

TEST(DgdProperty, DualStepDecaysLikeInverseRoot) {
  const auto prob = sparse_problem(14, 20, 60, 3, 0.02);
  const auto cfg = SolverConfig::standard(prob.x, 0.05, 4000);
  const Trace tr = dgd_run(prob, prob.reg, cfg);
  double first = 0.0, second = 0.0;
  for (std::size_t k = 1; k < tr.records.size(); ++k) {
    const double s = std::sqrt(double(k)) * (tr.records[k].v - tr.records[k - 1].v).norm();
    ASSERT_TRUE(std::isfinite(s));
    (k <= 2000 ? first : second) = std::max(k <= 2000 ? first : second, s);
  }
  EXPECT_LE(second, first);
}

TEST(AdgdProperty, DualGapDecay) {
  const auto prob = sparse_problem(15, 20, 60, 3, 0.02);
  const double alpha = 0.05;
  auto cfg = SolverConfig::standard(prob.x, alpha, 20000);
  cfg.record_every = 20000;
  const Trace ref = dgd_run(prob, prob.reg, cfg);
  const double phi_min = ref.records.back().dual_objective;
  const double r2 = ref.records.back().v.squaredNorm();
  const double theta = cfg.theta;
  cfg.max_iters = 800;
  cfg.record_every = 1;
  const Trace tr = adgd_run(prob, prob.reg, cfg);
  auto gap = [&](std::size_t k) {
    return dual_objective(prob, prob.reg, alpha, tr.records[k].v) - phi_min;
  };
  // (theta-1)^2 |v0 - v*|^2 / (2 gamma (k+theta-2)^2), v0 = 0.
  for (std::size_t k = 1; k <= 800; ++k) {
    const double shift = double(k) + theta - 2.0;
    EXPECT_LE(gap(k), (theta - 1) * (theta - 1) * r2 / (2 * cfg.gamma * shift * shift)) << k;
  }
}

TEST(StoppingSchedule, Examples) {
  EXPECT_EQ(stopping_schedule(0.01, 1.0, Method::DGD), 100u);
  EXPECT_EQ(stopping_schedule(0.01, 1.0, Method::ADGD), 10u);
  EXPECT_EQ(stopping_schedule(0.3, 0.3, Method::DGD), 1u);
  EXPECT_EQ(stopping_schedule(0.03, 1.0, Method::DGD), 33u);
  EXPECT_EQ(stopping_schedule(0.03, 1.0, Method::ADGD), 6u);
  EXPECT_THROW(stopping_schedule(0.5, 0.1, Method::DGD), InputError);
  EXPECT_THROW(stopping_schedule(0.0, 1.0, Method::DGD), InputError);
  EXPECT_THROW(stopping_schedule(0.1, 1.0, Method::ODE), InputError);
}

TEST(SolveNoiseless, ScalarInstance) {
  const auto sol = solve_noiseless(scalar_problem(), RegularizerSpec::l1(1), 1.0, 1e-12, 100);
  EXPECT_EQ(sol.w_limit(0), 2.0);
  EXPECT_EQ(sol.v_limit(0), -3.0);
}

TEST(SolveNoiseless, StoppingTestContract) {
  const auto prob = sparse_problem(16, 15, 40, 2, 0.0);
  const double tol = 1e-1;
  const auto sol = solve_noiseless(prob, prob.reg, 0.1, tol, 100000);
  const auto cfg = SolverConfig::standard(prob.x, 0.1, sol.iterations);
  const Trace tr = dgd_run(prob, prob.reg, cfg);
  const Vector& last = tr.records[sol.iterations].v;
  const Vector& prev = tr.records[sol.iterations - 1].v;
  EXPECT_LE((last - prev).norm(), tol * (1.0 + prev.norm()));
  EXPECT_EQ(sol.v_limit, last);
  if (sol.iterations > 1) {
    const Vector& before = tr.records[sol.iterations - 2].v;
    EXPECT_GT((prev - before).norm(), tol * (1.0 + before.norm()));
  }
}

TEST(SolveNoiseless, ReportsFailure) {
  const auto prob = sparse_problem(17, 15, 40, 2, 0.0);
  try {
    solve_noiseless(prob, prob.reg, 0.1, 1e-14, 3);
    FAIL() << "expected convergence failure";
  } catch (const ConvergenceFailure& e) {
    EXPECT_GT(e.last_residual(), 0.0);
  }
}

TEST(SolveNoiseless, RecoversModelUnderSourceCondition) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g;
  const double alpha = 0.1;
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 5; ++seed) {
    ASSERT_LT(seed, 50u);
    Matrix a = gaussian(20, 60, rng);
    const Matrix x = Eigen::HouseholderQR<Matrix>(a.transpose()).householderQ() *
                     Matrix::Identity(60, 20);
    Vector w = Vector::Zero(60);
    w(static_cast<Eigen::Index>(seed % 60)) = 1.0 + 0.5 * std::abs(g(rng));
    w(static_cast<Eigen::Index>((seed * 7 + 11) % 60)) = -(1.0 + 0.5 * std::abs(g(rng)));
    const auto prob = make_problem(x.transpose(), w, x.transpose() * w, RegularizerSpec::l1(60));
    if (!check_source_condition(prob.reg, alpha, w, prob.x, 1e-10).nondegenerate) continue;
    ++checked;
    const auto sol = solve_noiseless(prob, prob.reg, alpha, 1e-13, 200000);
    const Vector ref = oracle::constrained_l1_minimizer(prob.x.matrix(), prob.y_clean, alpha);
    EXPECT_LE((sol.w_limit - ref).lpNorm<Eigen::Infinity>(), 1e-4);
    EXPECT_EQ(model_descriptor(prob.reg, sol.w_limit), model_descriptor(prob.reg, w));
  }
}

TEST(MethodNames, RoundTrip) {
  for (Method m : {Method::DGD, Method::ADGD, Method::ODE}) {
    EXPECT_EQ(method_from_string(to_string(m)), m);
  }
  EXPECT_THROW(method_from_string("sgd"), InputError);
}

}  // namespace
}  // namespace itreg
