#include "itreg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "itreg/errors.hpp"

namespace itreg {
namespace {

constexpr std::uint32_t kProblemSalt = 0x70726f62;  // "prob"
constexpr std::uint32_t kNoiseSalt = 0x6e6f6973;    // "nois"
constexpr std::uint32_t kMaskSalt = 0x6d61736b;     // "mask"

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), salt};
  return std::mt19937_64(seq);
}

Vector randn(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Matrix randn(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Row by row, so the draw order does not depend on the storage order.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

std::vector<std::size_t> choose(std::mt19937_64& rng, std::size_t population, std::size_t count) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string problem_id(const ProblemStructure& s, std::uint64_t seed) {
  std::ostringstream os;
  os << to_string(s.kind);
  if (s.kind == RegKind::Nuclear) {
    os << "-" << s.rows << "x" << s.cols << "-r" << s.rank << "-d" << s.density;
  } else {
    os << "-n" << s.n << "-p" << s.p;
    if (s.kind != RegKind::TV1D) os << "-s" << s.sparsity;
    if (s.kind == RegKind::L12) os << "-g" << s.group_size;
  }
  os << "-seed" << seed;
  return os.str();
}

Vector observed_rows(const DenseOperator& x) {
  Vector support(static_cast<Eigen::Index>(x.rows()));
  for (Eigen::Index i = 0; i < support.size(); ++i) {
    support(i) = x.matrix().row(i).isZero(0.0) ? 0.0 : 1.0;
  }
  return support;
}

NoiseDraw scaled_noise(const Vector& y_clean, double delta, std::uint64_t seed,
                       const Vector* support) {
  auto rng = make_rng(seed, kNoiseSalt);
  Vector e = randn(rng, y_clean.size());
  if (support) e = e.cwiseProduct(*support);
  const double n = e.norm();
  if (n == 0.0) throw InputError("apply_noise: noise direction vanished");
  NoiseDraw d;
  d.y_noisy = y_clean + (delta / n) * e;
  d.delta = (d.y_noisy - y_clean).norm();
  return d;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + file.string());
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

nlohmann::json interval_json(const std::optional<KInterval>& iv) {
  if (!iv) return nullptr;
  return nlohmann::json::array({iv->first, iv->second});
}

// JSON cannot carry NaN/inf; they become null.
nlohmann::json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

std::string rows_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  write_trace_csv(os, rows);
  return os.str();
}

}  // namespace

RegularizerSpec make_regularizer(const ProblemStructure& s) {
  switch (s.kind) {
    case RegKind::L1: return RegularizerSpec::l1(s.p);
    case RegKind::L12: return RegularizerSpec::l12_uniform(s.p, s.group_size);
    case RegKind::TV1D: return RegularizerSpec::tv1d(s.p);
    case RegKind::Nuclear: return RegularizerSpec::nuclear(s.rows, s.cols);
  }
  throw InputError("make_regularizer: unknown kind");
}

ProblemInstance gen_problem(const ProblemStructure& s, std::uint64_t seed) {
  auto rng = make_rng(seed, kProblemSalt);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::optional<DenseOperator> x;
  Vector w;
  switch (s.kind) {
    case RegKind::L1:
    case RegKind::L12:
    case RegKind::TV1D: {
      if (s.n == 0 || s.p == 0) throw InputError("gen_problem: n and p must be positive");
      const auto n = static_cast<Eigen::Index>(s.n);
      const auto p = static_cast<Eigen::Index>(s.p);
      x.emplace(randn(rng, n, p) / std::sqrt(static_cast<double>(s.n)));
      w = Vector::Zero(p);
      if (s.kind == RegKind::L1) {
        if (s.sparsity == 0 || s.sparsity > s.p) throw InputError("gen_problem: sparsity must lie in [1, p]");
        for (auto i : choose(rng, s.p, s.sparsity)) w(static_cast<Eigen::Index>(i)) = normal(rng);
      } else if (s.kind == RegKind::L12) {
        if (s.group_size == 0 || s.p % s.group_size != 0) {
          throw InputError("gen_problem: group size must divide p");
        }
        if (s.sparsity == 0 || s.sparsity % s.group_size != 0 || s.sparsity > s.p) {
          throw InputError("gen_problem: sparsity must be a positive multiple of the group size");
        }
        for (auto g : choose(rng, s.p / s.group_size, s.sparsity / s.group_size)) {
          for (std::size_t j = 0; j < s.group_size; ++j) {
            w(static_cast<Eigen::Index>(g * s.group_size + j)) = normal(rng);
          }
        }
      } else {
        if (s.p < 2) throw InputError("gen_problem: tv1d needs p >= 2");
        const std::size_t jump = choose(rng, s.p - 1, 1).front();
        // Dyadic base level keeps the unit jump exact in floating point.
        const double base = std::round(normal(rng) * 1048576.0) / 1048576.0;
        const double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
        for (std::size_t i = 0; i < s.p; ++i) {
          w(static_cast<Eigen::Index>(i)) = i <= jump ? base : base + sign;
        }
      }
      break;
    }
    case RegKind::Nuclear: {
      if (s.rows == 0 || s.cols == 0) throw InputError("gen_problem: empty matrix shape");
      if (s.rank == 0 || s.rank > std::min(s.rows, s.cols)) {
        throw InputError("gen_problem: rank must lie in [1, min(rows, cols)]");
      }
      const auto r = static_cast<Eigen::Index>(s.rows);
      const auto c = static_cast<Eigen::Index>(s.cols);
      Matrix wm = Matrix::Zero(r, c);
      for (std::size_t i = 0; i < s.rank; ++i) {
        const Vector a = randn(rng, r);
        const Vector b = randn(rng, c);
        wm += a * b.transpose();
      }
      w = Eigen::Map<const Vector>(wm.data(), wm.size());
      const std::uint64_t mask_seed = rng();
      const DenseOperator mask = mask_operator(s.rows, s.cols, s.density, mask_seed ^ kMaskSalt);
      x.emplace(mask_as_diagonal(mask));
      break;
    }
  }

  ProblemInstance prob{*x, w, Vector(), Vector(), 0.0,
                       std::numeric_limits<double>::infinity(), seed, make_regularizer(s),
                       problem_id(s, seed)};
  prob.y_clean = prob.x.apply(prob.w_true);
  prob.y_noisy = prob.y_clean;
  return prob;
}

NoiseDraw apply_noise(const Vector& y_clean, double snr_db, std::uint64_t seed) {
  if (y_clean.norm() == 0.0) throw InputError("apply_noise: clean observation is zero");
  if (!std::isfinite(snr_db)) throw InputError("apply_noise: snr must be finite");
  return scaled_noise(y_clean, y_clean.norm() * std::pow(10.0, -snr_db / 20.0), seed, nullptr);
}

NoiseDraw apply_noise_level(const Vector& y_clean, double delta, std::uint64_t seed) {
  if (!(delta > 0.0)) throw InputError("apply_noise_level: delta must be positive");
  return scaled_noise(y_clean, delta, seed, nullptr);
}

ProblemInstance with_noise_level(ProblemInstance problem, double delta, std::uint64_t seed) {
  if (problem.y_clean.norm() == 0.0) throw InputError("with_noise_level: clean observation is zero");
  if (!(delta > 0.0)) throw InputError("with_noise_level: delta must be positive");
  // Noise only on rows the operator observes (all rows unless X is a mask).
  const Vector support = observed_rows(problem.x);
  const NoiseDraw d = scaled_noise(problem.y_clean, delta, seed, &support);
  problem.y_noisy = d.y_noisy;
  problem.noise_norm = d.delta;
  problem.snr_db = 20.0 * std::log10(problem.y_clean.norm() / d.delta);
  return problem;
}

ProblemInstance with_snr(ProblemInstance problem, double snr_db, std::uint64_t seed) {
  if (problem.y_clean.norm() == 0.0) throw InputError("with_snr: clean observation is zero");
  if (!std::isfinite(snr_db)) throw InputError("with_snr: snr must be finite");
  const double delta = problem.y_clean.norm() * std::pow(10.0, -snr_db / 20.0);
  return with_noise_level(std::move(problem), delta, seed);
}

// ---------------------------------------------------------------------------
// configuration

double ExperimentConfig::tol() const {
  return descriptor_tol.value_or(default_descriptor_tol(structure.kind));
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "reg",   "n",     "p",         "sparsity",    "group_size",     "rank",
      "rows",  "cols",  "density",   "snr_db",      "snr_grid",       "alpha",
      "method", "theta", "c",        "max_iters",   "record_every",   "seed",
      "out",   "descriptor_tol",     "early_exit_ratio"};
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InputError("config: unknown key '" + key + "'");
  }
  ExperimentConfig cfg;
  try {
    auto& s = cfg.structure;
    if (j.contains("reg")) s.kind = reg_kind_from_string(j.at("reg").get<std::string>());
    s.n = j.value("n", s.n);
    s.p = j.value("p", s.p);
    s.sparsity = j.value("sparsity", s.sparsity);
    s.group_size = j.value("group_size", s.group_size);
    s.rank = j.value("rank", s.rank);
    s.rows = j.value("rows", s.rows);
    s.cols = j.value("cols", s.cols);
    s.density = j.value("density", s.density);
    cfg.snr_db = j.value("snr_db", cfg.snr_db);
    if (j.contains("snr_grid")) cfg.snr_grid = j.at("snr_grid").get<std::vector<double>>();
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (j.contains("method")) {
      const auto& m = j.at("method");
      cfg.methods.clear();
      if (m.is_array()) {
        for (const auto& e : m) cfg.methods.push_back(method_from_string(e.get<std::string>()));
      } else {
        cfg.methods.push_back(method_from_string(m.get<std::string>()));
      }
    }
    cfg.theta = j.value("theta", cfg.theta);
    cfg.c = j.value("c", cfg.c);
    cfg.max_iters = j.value("max_iters", cfg.max_iters);
    cfg.record_every = j.value("record_every", cfg.record_every);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("descriptor_tol")) cfg.descriptor_tol = j.at("descriptor_tol").get<double>();
    cfg.early_exit_ratio = j.value("early_exit_ratio", cfg.early_exit_ratio);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (cfg.methods.empty()) throw InputError("config: no method given");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read config " + file.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + file.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["reg"] = std::string(to_string(structure.kind));
  if (structure.kind == RegKind::Nuclear) {
    j["rows"] = structure.rows;
    j["cols"] = structure.cols;
    j["rank"] = structure.rank;
    j["density"] = structure.density;
  } else {
    j["n"] = structure.n;
    j["p"] = structure.p;
    if (structure.kind != RegKind::TV1D) j["sparsity"] = structure.sparsity;
    if (structure.kind == RegKind::L12) j["group_size"] = structure.group_size;
  }
  j["snr_db"] = snr_db;
  if (!snr_grid.empty()) j["snr_grid"] = snr_grid;
  j["alpha"] = alpha;
  nlohmann::json ms = nlohmann::json::array();
  for (auto m : methods) ms.push_back(std::string(to_string(m)));
  j["method"] = ms;
  j["theta"] = theta;
  j["c"] = c;
  j["max_iters"] = max_iters;
  j["record_every"] = record_every;
  j["seed"] = seed;
  if (descriptor_tol) j["descriptor_tol"] = *descriptor_tol;
  if (early_exit_ratio > 0.0) j["early_exit_ratio"] = early_exit_ratio;
  return j;
}

// ---------------------------------------------------------------------------
// experiments

ProblemInstance experiment_problem(const ExperimentConfig& cfg) {
  return with_snr(gen_problem(cfg.structure, cfg.seed), cfg.snr_db, noise_seed(cfg.seed, 0));
}

SolverConfig experiment_solver_config(const ExperimentConfig& cfg, const ProblemInstance& problem) {
  SolverConfig sc = SolverConfig::standard(problem.x, cfg.alpha, cfg.max_iters);
  sc.theta = cfg.theta;
  sc.record_every = cfg.record_every;
  return sc;
}

RecordObserver early_exit_observer(const ExperimentConfig& cfg, const ProblemInstance& problem,
                                   const ModelDescriptor& truth) {
  if (!(cfg.early_exit_ratio > 0.0)) return {};
  auto best = std::make_shared<double>(std::numeric_limits<double>::infinity());
  const double ratio = cfg.early_exit_ratio;
  const double tol = cfg.tol();
  const RegularizerSpec reg = problem.reg;
  return [best, ratio, tol, reg, truth](const IterateRecord& r) {
    *best = std::min(*best, r.err_to_truth);
    if (r.err_to_truth <= ratio * *best) return true;
    return model_descriptor(reg, r.w, tol) == truth;
  };
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res{experiment_problem(cfg), {}, {}};
  const auto& prob = res.problem;
  res.truth = model_descriptor(prob.reg, prob.w_true, cfg.tol());
  const SolverConfig sc = experiment_solver_config(cfg, prob);
  const double truth_norm = prob.w_true.norm();

  if (!cfg.out_dir.empty()) ensure_dir(cfg.out_dir);
  for (auto m : cfg.methods) {
    MethodOutcome out;
    out.trace = run_method(m, prob, prob.reg, sc, early_exit_observer(cfg, prob, res.truth));
    out.consistency = consistency_report(out.trace, res.truth, prob.reg, cfg.tol());
    if (!cfg.out_dir.empty()) {
      const std::string tag(to_string(m));
      write_text(cfg.out_dir / ("trace_" + tag + ".csv"),
                 rows_csv(trace_rows(out.trace, prob.reg, res.truth, cfg.tol(), truth_norm)));
      nlohmann::json rep;
      rep["method"] = tag;
      rep["problem_id"] = prob.id;
      rep["config"] = cfg.to_json();
      rep["delta"] = prob.noise_norm;
      rep["snr_db_realized"] = prob.snr_db;
      rep["gamma"] = sc.gamma;
      rep["truth_descriptor_size"] = res.truth.size();
      rep["records"] = out.trace.records.size();
      rep["consistency"] = to_json(out.consistency);
      write_text(cfg.out_dir / ("report_" + tag + ".json"), dump(rep));
    }
    res.outcomes.push_back(std::move(out));
  }
  return res;
}

std::vector<SweepRow> snr_sweep(const ExperimentConfig& cfg) {
  if (cfg.snr_grid.empty()) throw InputError("snr_sweep: empty snr grid");
  if (!std::is_sorted(cfg.snr_grid.begin(), cfg.snr_grid.end())) {
    throw InputError("snr_sweep: snr grid must be ascending");
  }
  const ProblemInstance clean = gen_problem(cfg.structure, cfg.seed);
  const ModelDescriptor truth = model_descriptor(clean.reg, clean.w_true, cfg.tol());

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < cfg.snr_grid.size(); ++i) {
    const ProblemInstance prob = with_snr(clean, cfg.snr_grid[i], noise_seed(cfg.seed, i));
    const SolverConfig sc = experiment_solver_config(cfg, prob);
    const Trace tr = dgd_run(prob, prob.reg, sc, early_exit_observer(cfg, prob, truth));
    const ConsistencyReport rep = consistency_report(tr, truth, prob.reg, cfg.tol());
    const auto best = std::find_if(tr.records.begin(), tr.records.end(),
                                   [&](const IterateRecord& r) { return r.k == rep.k_best; });
    SweepRow row;
    row.snr_db = cfg.snr_grid[i];
    row.delta = prob.noise_norm;
    row.k_best = rep.k_best;
    row.descriptor_size = model_descriptor(prob.reg, best->w, cfg.tol()).size();
    row.consistent = rep.consistent_at_best;
    rows.push_back(row);
  }

  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    std::ostringstream os;
    os << "snr_db,delta,k_best,descriptor_size,consistent\n";
    for (const auto& r : rows) {
      os << format_double(r.snr_db) << ',' << format_double(r.delta) << ',' << r.k_best << ','
         << r.descriptor_size << ',' << (r.consistent ? 1 : 0) << '\n';
    }
    write_text(cfg.out_dir / "sweep.csv", os.str());
  }
  return rows;
}

LocalAnalysis local_analysis(const ExperimentConfig& cfg) {
  ExperimentConfig dense = cfg;
  dense.record_every = 1;
  LocalAnalysis la{experiment_problem(dense), {}, {}, {}, {}, {}, false, {}};
  const auto& prob = la.problem;
  const ModelDescriptor truth = model_descriptor(prob.reg, prob.w_true, dense.tol());
  const double truth_norm = prob.w_true.norm();
  la.trace = dgd_run(prob, prob.reg, experiment_solver_config(dense, prob));
  la.consistency = consistency_report(la.trace, truth, prob.reg, dense.tol());

  if (!is_affine(prob.reg.kind())) {
    la.notes.emplace_back("rate analysis unsupported for the nuclear norm");
  } else if (!la.consistency.interval) {
    la.notes.emplace_back("no consistency interval; rate analysis skipped");
  } else {
    const KInterval iv = *la.consistency.interval;
    const auto& anchor = la.trace.records[first_record_in(la.trace, iv)];
    LocalRateReport rate = build_mdgd(prob.x, prob.reg, anchor.w, truth, dense.alpha);
    try {
      fit_rate(la.trace, rate, iv, truth_norm);
      la.contract_ok = rate_contract_holds(rate);
    } catch (const InsufficientData& e) {
      la.notes.emplace_back(std::string("insufficient data: ") + e.what());
    }
    if (rate.rho < 1.0) {
      la.envelope = error_envelope_check(la.trace, rate, la.consistency.k_best,
                                         la.consistency.d_best, iv, truth_norm);
    } else {
      la.notes.emplace_back("spectral radius not below 1; envelope not applicable");
    }
    const std::size_t triples = is_polyhedral(prob.reg.kind()) ? 0 : kNearAnchorTriples;
    la.linearization = linearization_residual(la.trace, rate, iv, triples,
                                              kLinearizationFloor * (1.0 + truth_norm));
    la.rate = std::move(rate);
  }

  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    write_text(cfg.out_dir / "local_trace.csv",
               rows_csv(trace_rows(la.trace, prob.reg, truth, dense.tol(), truth_norm)));
    nlohmann::json j;
    j["problem_id"] = prob.id;
    j["config"] = dense.to_json();
    j["delta"] = prob.noise_norm;
    j["consistency"] = to_json(la.consistency);
    j["local_rate"] = la.rate ? to_json(*la.rate) : nlohmann::json(nullptr);
    j["contract_ok"] = la.contract_ok;
    if (la.envelope) {
      j["envelope"] = {{"holds", la.envelope->holds},
                       {"d_const", num(la.envelope->d_const)},
                       {"checked", la.envelope->checked}};
    } else {
      j["envelope"] = nullptr;
    }
    if (la.linearization) {
      j["linearization"] = {{"max_relative", la.linearization->max_relative},
                            {"max_absolute", la.linearization->max_absolute},
                            {"triples", la.linearization->triples}};
    } else {
      j["linearization"] = nullptr;
    }
    j["notes"] = la.notes;
    write_text(cfg.out_dir / "local_report.json", dump(j));
  }
  return la;
}

OdeComparison ode_comparison(const ExperimentConfig& cfg) {
  const ProblemInstance prob = experiment_problem(cfg);
  const ModelDescriptor truth = model_descriptor(prob.reg, prob.w_true, cfg.tol());
  SolverConfig sc = experiment_solver_config(cfg, prob);
  sc.ode_step = sc.gamma;
  const double truth_norm = prob.w_true.norm();

  OdeComparison cmp;
  cmp.dgd.trace = dgd_run(prob, prob.reg, sc);
  cmp.dgd.consistency = consistency_report(cmp.dgd.trace, truth, prob.reg, cfg.tol());
  cmp.ode.trace = ode_run(prob, prob.reg, sc, static_cast<double>(sc.max_iters) * sc.gamma);
  cmp.ode.consistency = consistency_report(cmp.ode.trace, truth, prob.reg, cfg.tol());

  const auto& a = cmp.dgd.consistency.interval;
  const auto& b = cmp.ode.consistency.interval;
  if (a && b) {
    const std::size_t lo = std::max(a->first, b->first);
    const std::size_t hi = std::min(a->second, b->second);
    if (lo <= hi) cmp.overlap = KInterval{lo, hi};
  }
  if (cmp.overlap) {
    const auto& rd = cmp.dgd.trace.records;
    const auto& ro = cmp.ode.trace.records;
    for (std::size_t i = 0; i < std::min(rd.size(), ro.size()); ++i) {
      if (rd[i].k != ro[i].k) throw InputError("ode_comparison: traces are not aligned");
      if (rd[i].k < cmp.overlap->first || rd[i].k > cmp.overlap->second) continue;
      cmp.sup_rel_distance =
          std::max(cmp.sup_rel_distance, (ro[i].w - rd[i].w).norm() / truth_norm);
    }
  }

  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    write_text(cfg.out_dir / "trace_dgd.csv",
               rows_csv(trace_rows(cmp.dgd.trace, prob.reg, truth, cfg.tol(), truth_norm)));
    write_text(cfg.out_dir / "trace_ode.csv",
               rows_csv(trace_rows(cmp.ode.trace, prob.reg, truth, cfg.tol(), truth_norm)));
    nlohmann::json j;
    j["problem_id"] = prob.id;
    j["config"] = cfg.to_json();
    j["ode_step"] = sc.ode_step;
    j["dgd"] = to_json(cmp.dgd.consistency);
    j["ode"] = to_json(cmp.ode.consistency);
    j["overlap"] = interval_json(cmp.overlap);
    j["sup_rel_distance"] = cmp.sup_rel_distance;
    write_text(cfg.out_dir / "ode_report.json", dump(j));
  }
  return cmp;
}

nlohmann::json problem_to_json(const ProblemInstance& problem) {
  nlohmann::json j;
  j["id"] = problem.id;
  j["reg"] = std::string(to_string(problem.reg.kind()));
  j["seed"] = problem.seed;
  j["x"] = matrix_json(problem.x.matrix());
  j["w_true"] = vector_json(problem.w_true);
  j["y_clean"] = vector_json(problem.y_clean);
  j["y_noisy"] = vector_json(problem.y_noisy);
  j["noise_norm"] = problem.noise_norm;
  j["snr_db"] = num(problem.snr_db);
  return j;
}

void write_problem(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) throw InputError("gen: no output directory");
  ensure_dir(cfg.out_dir);
  write_text(cfg.out_dir / "problem.json", dump(problem_to_json(experiment_problem(cfg))));
}

// ---------------------------------------------------------------------------
// CSV / JSON

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<TraceRow> trace_rows(const Trace& trace, const RegularizerSpec& reg,
                                 const ModelDescriptor& truth, double tol, double truth_norm) {
  std::vector<TraceRow> rows;
  rows.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    const ModelDescriptor d = model_descriptor(reg, r.w, tol);
    TraceRow row;
    row.k = r.k;
    row.t = r.t;
    row.err_to_truth = r.err_to_truth;
    row.err_rel = truth_norm > 0.0 ? r.err_to_truth / truth_norm : r.err_to_truth;
    row.residual = r.residual;
    row.step_diff = r.step_diff;
    row.descriptor_size = d.size();
    row.consistent = d == truth;
    row.dual_objective = r.dual_objective;
    rows.push_back(row);
  }
  return rows;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << kTraceHeader << '\n';
  for (const auto& r : rows) {
    os << r.k << ',' << format_double(r.t) << ',' << format_double(r.err_to_truth) << ','
       << format_double(r.err_rel) << ',' << format_double(r.residual) << ','
       << format_double(r.step_diff) << ',' << r.descriptor_size << ',' << (r.consistent ? 1 : 0)
       << ',' << format_double(r.dual_objective) << '\n';
  }
}

std::vector<TraceRow> parse_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("trace csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw InputError("trace csv: unexpected header '" + line + "'");

  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) {
      throw InputError("trace csv: line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields");
    }
    auto real = [&](std::size_t i) {
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (end == cells[i].c_str() || *end != '\0') {
        throw InputError("trace csv: bad number '" + cells[i] + "' on line " + std::to_string(lineno));
      }
      return v;
    };
    auto count = [&](std::size_t i) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(cells[i].c_str(), &end, 10);
      if (end == cells[i].c_str() || *end != '\0') {
        throw InputError("trace csv: bad integer '" + cells[i] + "' on line " + std::to_string(lineno));
      }
      return static_cast<std::size_t>(v);
    };
    TraceRow r;
    r.k = count(0);
    r.t = real(1);
    r.err_to_truth = real(2);
    r.err_rel = real(3);
    r.residual = real(4);
    r.step_diff = real(5);
    r.descriptor_size = count(6);
    r.consistent = count(7) != 0;
    r.dual_objective = real(8);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json to_json(const ConsistencyReport& r) {
  return {{"k_best", r.k_best},
          {"d_best", r.d_best},
          {"interval", interval_json(r.interval)},
          {"consistent_at_best", r.consistent_at_best}};
}

nlohmann::json to_json(const LocalRateReport& r) {
  return {{"p_t", matrix_json(r.p_t)},
          {"m", matrix_json(r.m)},
          {"rho", r.rho},
          {"max_imag", r.max_imag},
          {"sigma_min_t", num(r.sigma_min_t)},
          {"inj_ok", r.inj_ok},
          {"x_norm", r.x_norm},
          {"fitted_slope", r.fitted_slope},
          {"window", interval_json(r.window)}};
}

}  // namespace itreg
