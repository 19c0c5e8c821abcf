#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "itreg/analysis.hpp"

namespace itreg {

struct ProblemStructure {
  RegKind kind = RegKind::L1;
  std::size_t n = 0;           // observations (ignored for Nuclear)
  std::size_t p = 0;           // unknowns (ignored for Nuclear)
  std::size_t sparsity = 0;    // nonzero entries of w_true (L1, L12)
  std::size_t group_size = 1;  // L12
  std::size_t rank = 1;        // Nuclear
  std::size_t rows = 0;        // Nuclear matrix shape
  std::size_t cols = 0;
  double density = 0.5;        // Nuclear mask density
};

RegularizerSpec make_regularizer(const ProblemStructure& s);

// Noise-free instance (y_noisy = y_clean).
ProblemInstance gen_problem(const ProblemStructure& s, std::uint64_t seed);

struct NoiseDraw {
  Vector y_noisy;
  double delta = 0.0;
};

// Gaussian direction rescaled to norm |y_clean| 10^(-snr_db/20).
NoiseDraw apply_noise(const Vector& y_clean, double snr_db, std::uint64_t seed);
NoiseDraw apply_noise_level(const Vector& y_clean, double delta, std::uint64_t seed);

ProblemInstance with_snr(ProblemInstance problem, double snr_db, std::uint64_t seed);
ProblemInstance with_noise_level(ProblemInstance problem, double delta, std::uint64_t seed);

// Seed of the noise draw for grid point `index`.
inline std::uint64_t noise_seed(std::uint64_t base, std::uint64_t index) { return base ^ index; }

struct ExperimentConfig {
  ProblemStructure structure;
  double snr_db = 40.0;
  std::vector<double> snr_grid;
  double alpha = 0.01;
  std::vector<Method> methods{Method::DGD};
  double theta = 5.0;
  double c = 1.0;
  std::size_t max_iters = 10000;
  std::size_t record_every = 1;
  std::uint64_t seed = 0;
  std::optional<double> descriptor_tol;
  // Stop a run once err_to_truth exceeds this multiple of the running minimum
  // and the descriptor has left the truth model; 0 disables.
  double early_exit_ratio = 0.0;
  std::filesystem::path out_dir;

  double tol() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& file);
  nlohmann::json to_json() const;
};

struct MethodOutcome {
  Trace trace;
  ConsistencyReport consistency;
};

struct ExperimentResult {
  ProblemInstance problem;
  ModelDescriptor truth;
  std::vector<MethodOutcome> outcomes;
};

ProblemInstance experiment_problem(const ExperimentConfig& cfg);
SolverConfig experiment_solver_config(const ExperimentConfig& cfg, const ProblemInstance& problem);
RecordObserver early_exit_observer(const ExperimentConfig& cfg, const ProblemInstance& problem,
                                   const ModelDescriptor& truth);

// Runs every configured method; writes trace_<m>.csv and report_<m>.json when
// out_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double snr_db = 0.0;
  double delta = 0.0;
  std::size_t k_best = 0;
  std::size_t descriptor_size = 0;
  bool consistent = false;
};

// DGD with oracle stopping on every grid point; writes sweep.csv.
std::vector<SweepRow> snr_sweep(const ExperimentConfig& cfg);

struct LocalAnalysis {
  ProblemInstance problem;
  Trace trace;
  ConsistencyReport consistency;
  std::optional<LocalRateReport> rate;
  std::optional<EnvelopeResult> envelope;
  std::optional<LinearizationCheck> linearization;
  bool contract_ok = false;
  std::vector<std::string> notes;
};

// Dense DGD run, M_DGD at the first consistent iterate, rate fit, envelope;
// writes local_report.json and local_trace.csv.
LocalAnalysis local_analysis(const ExperimentConfig& cfg);

struct OdeComparison {
  MethodOutcome dgd;
  MethodOutcome ode;
  std::optional<KInterval> overlap;
  double sup_rel_distance = 0.0;  // over the overlap, |w_ode - w_dgd| / |w_true|
};

// DGD and the RK4 flow with step gamma on the same instance; writes
// trace_dgd.csv, trace_ode.csv and ode_report.json.
OdeComparison ode_comparison(const ExperimentConfig& cfg);

// Problem dump: operator, ground truth, observations, noise metadata.
nlohmann::json problem_to_json(const ProblemInstance& problem);
void write_problem(const ExperimentConfig& cfg);

// ---- trace CSV ----
inline constexpr const char* kTraceHeader =
    "k,t,err_to_truth,err_rel,residual,step_diff,descriptor_size,consistent,dual_objective";

struct TraceRow {
  std::size_t k = 0;
  double t = 0.0;
  double err_to_truth = 0.0;
  double err_rel = 0.0;
  double residual = 0.0;
  double step_diff = kAbsent;
  std::size_t descriptor_size = 0;
  bool consistent = false;
  double dual_objective = 0.0;
};

std::vector<TraceRow> trace_rows(const Trace& trace, const RegularizerSpec& reg,
                                 const ModelDescriptor& truth, double tol, double truth_norm);
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows);
std::vector<TraceRow> parse_trace_csv(std::istream& is);

std::string format_double(double x);

nlohmann::json to_json(const ConsistencyReport& r);
nlohmann::json to_json(const LocalRateReport& r);

}  // namespace itreg
