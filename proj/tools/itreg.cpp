// Command-line driver: problem generation and the experiment commands.

#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "itreg/errors.hpp"
#include "itreg/harness.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr;
  std::optional<double> alpha;
  std::optional<double> theta;
  std::optional<double> c;
  std::optional<std::string> reg;
  std::optional<std::string> method;
  std::optional<std::size_t> max_iters;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--snr", o.snr, "signal-to-noise ratio in dB");
  cmd->add_option("--alpha", o.alpha, "strong convexity weight");
  cmd->add_option("--theta", o.theta, "ADGD inertia parameter (> 2)");
  cmd->add_option("--c", o.c, "stopping schedule constant");
  cmd->add_option("--reg", o.reg, "regularizer")
      ->check(CLI::IsMember({"l1", "l12", "tv1d", "nuclear"}));
  cmd->add_option("--method", o.method, "solver")->check(CLI::IsMember({"dgd", "adgd", "ode"}));
  cmd->add_option("--max-iters", o.max_iters, "iteration budget");
  cmd->add_option("--out", o.out, "output directory");
}

itreg::ExperimentConfig resolve(const Overrides& o) {
  itreg::ExperimentConfig cfg =
      o.config.empty() ? itreg::ExperimentConfig{} : itreg::ExperimentConfig::load(o.config);
  if (o.reg) cfg.structure.kind = itreg::reg_kind_from_string(*o.reg);
  if (o.seed) cfg.seed = *o.seed;
  if (o.snr) cfg.snr_db = *o.snr;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.theta) cfg.theta = *o.theta;
  if (o.c) cfg.c = *o.c;
  if (o.method) cfg.methods = {itreg::method_from_string(*o.method)};
  if (o.max_iters) cfg.max_iters = *o.max_iters;
  if (o.out) cfg.out_dir = *o.out;
  if (cfg.out_dir.empty()) cfg.out_dir = "out";
  return cfg;
}

void print_interval(const itreg::ConsistencyReport& r) {
  if (r.interval) {
    std::printf("consistent on [%zu, %zu], k_best=%zu, d_best=%.6g\n", r.interval->first,
                r.interval->second, r.k_best, r.d_best);
  } else {
    std::printf("no consistency interval, k_best=%zu, d_best=%.6g\n", r.k_best, r.d_best);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative regularization by dual gradient descent"};
  app.require_subcommand(1);

  Overrides gen_o, run_o, sweep_o, local_o, ode_o;
  auto* gen = app.add_subcommand("gen", "write the generated problem instance");
  auto* run = app.add_subcommand("run", "single experiment: trace CSV and consistency report");
  auto* sweep = app.add_subcommand("sweep", "SNR sweep with oracle stopping");
  auto* local = app.add_subcommand("local", "local rate analysis around the consistency interval");
  auto* ode = app.add_subcommand("ode", "continuous flow against DGD");
  add_common(gen, gen_o);
  add_common(run, run_o);
  add_common(sweep, sweep_o);
  add_common(local, local_o);
  add_common(ode, ode_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto cfg = resolve(gen_o);
      itreg::write_problem(cfg);
      std::printf("wrote %s\n", (cfg.out_dir / "problem.json").string().c_str());
    } else if (run->parsed()) {
      const auto cfg = resolve(run_o);
      const auto res = itreg::run_experiment(cfg);
      for (std::size_t i = 0; i < res.outcomes.size(); ++i) {
        std::printf("%s: ", std::string(itreg::to_string(cfg.methods[i])).c_str());
        print_interval(res.outcomes[i].consistency);
      }
    } else if (sweep->parsed()) {
      const auto cfg = resolve(sweep_o);
      for (const auto& r : itreg::snr_sweep(cfg)) {
        std::printf("snr=%g delta=%.4g k_best=%zu size=%zu consistent=%d\n", r.snr_db, r.delta,
                    r.k_best, r.descriptor_size, r.consistent ? 1 : 0);
      }
    } else if (local->parsed()) {
      const auto cfg = resolve(local_o);
      const auto la = itreg::local_analysis(cfg);
      print_interval(la.consistency);
      if (la.rate) {
        std::printf("rho=%.6f sigma_min_T=%.4g inj_ok=%d fitted_slope=%.6f log(rho)=%.6f\n",
                    la.rate->rho, la.rate->sigma_min_t, la.rate->inj_ok ? 1 : 0,
                    la.rate->fitted_slope, std::log(la.rate->rho));
      }
      if (la.envelope) {
        std::printf("envelope holds=%d D=%.4g over %zu records\n", la.envelope->holds ? 1 : 0,
                    la.envelope->d_const, la.envelope->checked);
      }
      if (la.linearization) {
        std::printf("linearization max_relative=%.3g max_absolute=%.3g triples=%zu\n",
                    la.linearization->max_relative, la.linearization->max_absolute,
                    la.linearization->triples);
      }
      for (const auto& n : la.notes) std::printf("note: %s\n", n.c_str());
    } else if (ode->parsed()) {
      const auto cfg = resolve(ode_o);
      const auto cmp = itreg::ode_comparison(cfg);
      std::printf("dgd: ");
      print_interval(cmp.dgd.consistency);
      std::printf("ode: ");
      print_interval(cmp.ode.consistency);
      std::printf("sup relative distance on overlap: %.4g\n", cmp.sup_rel_distance);
    }
  } catch (const itreg::DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const itreg::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
