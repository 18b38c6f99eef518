// Command-line front end: train the amplitude classifier, run sweeps, print
// oracle estimates.
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dapsk/config.hpp"
#include "dapsk/oracle.hpp"
#include "dapsk/report.hpp"
#include "dapsk/simulate.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> settings;
  long long seed = -1;
};

dapsk::SimConfig resolve(const CommonArgs& a) {
  dapsk::SimConfig cfg = a.config.empty() ? dapsk::SimConfig{} : dapsk::load_config(a.config);
  for (const auto& kv : a.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    dapsk::apply_setting(cfg, dapsk::detail::trim(kv.substr(0, eq)), dapsk::detail::trim(kv.substr(eq + 1)));
  }
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config, "key = value config file");
  cmd->add_option("-s,--set", a.settings, "override a config key (key=value), repeatable");
  cmd->add_option("--seed", a.seed, "master seed (overrides the config)");
}

int run_train(const CommonArgs& a, const std::string& out) {
  const auto cfg = resolve(a);
  std::fprintf(stderr, "training on %zu samples, %d epochs\n", cfg.train_samples, cfg.epochs);
  const auto result = dapsk::train_amplitude_model(cfg);
  dapsk::save_model({result.model, cfg.snr_db, dapsk::kModelSchemaVersion}, out);
  std::fprintf(stderr, "final loss %.6f, model written to %s\n", result.loss_history.back(), out.c_str());
  return 0;
}

int run_sweep(const CommonArgs& a, const std::string& out, const std::string& svg) {
  const auto cfg = resolve(a);
  const auto records = dapsk::sweep(cfg);
  if (out.empty() || out == "-") {
    std::cout << dapsk::to_csv(records);
  } else {
    dapsk::emit_csv(records, out);
  }
  if (!svg.empty()) dapsk::emit_svg(records, svg);
  return 0;
}

int run_oracle(const CommonArgs& a) {
  const auto cfg = resolve(a);
  const auto bg = dapsk::oracle::bussgang_mc(1000000, 1.0, dapsk::derive_seed(cfg.seed, 1));
  const auto closed = dapsk::bussgang_params(1.0);
  std::printf("bussgang  eta_mc=%.5f eta_closed=%.5f sigma_eps2_mc=%.5f sigma_eps2_closed=%.5f\n", bg.eta,
              closed.eta, bg.sigma_eps2, closed.sigma_eps2);

  const dapsk::ChannelConfig ch(cfg.antennas, cfg.taps, cfg.uses, cfg.pdp_profile(), 0.0);
  const auto cs = dapsk::oracle::channel_stats_mc(ch, 20, dapsk::derive_seed(cfg.seed, 2));
  std::printf("channel   power=%.5f lag1_corr=%.5f\n", cs.power, cs.adjacent_corr);

  for (int U : {8, 32}) {
    const auto m = dapsk::oracle::ncx2_moments(U, 1.0, 0.63245553, closed.eta, 0.8);
    std::printf("ncx2      U=%d mass=%.6f mean=%.6f expected_mean=%.6f\n", U, m.mass, m.mean,
                0.4 * closed.eta * closed.eta + 0.8);
  }

  const std::vector<dapsk::cplx> prev{{1, 1}, {1, -1}};
  const std::vector<dapsk::cplx> now{{1, 1}, {-1, -1}};
  const dapsk::Candidate cand{1.0, {1.0, 0.0}};
  for (double rho : {0.5, 2.0, 8.0}) {
    const auto f = dapsk::oracle::sign_pattern_frequency(now, prev, cand, rho, 1000000,
                                                         dapsk::derive_seed(cfg.seed, 3));
    const double model = std::exp(dapsk::onebit_loglik(dapsk::realify(now, prev), cand, rho));
    std::printf("signlik   rho=%.2f freq=%.6f se=%.6f model=%.6f\n", rho, f.p, f.stderr_, model);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential APSK over one-bit / VQL massive MIMO receivers"};
  app.require_subcommand(1);

  CommonArgs train_args, sweep_args, oracle_args;
  std::string model_out = "model.json", csv_out, svg_out;

  auto* train = app.add_subcommand("train", "generate a dataset and train the amplitude classifier");
  add_common(train, train_args);
  train->add_option("-o,--out", model_out, "model file to write")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "run a Monte-Carlo campaign and write CSV/SVG");
  add_common(sweep, sweep_args);
  sweep->add_option("-o,--out", csv_out, "CSV output path (stdout when omitted)");
  sweep->add_option("--svg", svg_out, "SVG plot output path");

  auto* oracle = app.add_subcommand("oracle", "print independent Monte-Carlo / quadrature estimates");
  add_common(oracle, oracle_args);

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return run_train(train_args, model_out);
    if (sweep->parsed()) return run_sweep(sweep_args, csv_out, svg_out);
    if (oracle->parsed()) return run_oracle(oracle_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
