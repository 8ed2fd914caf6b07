// doq: decision-oriented quantizer experiments.
//
// Subcommands: thresholds, regions, compression, mimo, train-nn, eval.
// Exit codes: 0 success, 2 validation error, 3 runtime/numeric error.
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiment.hpp"

namespace {

int guarded(const std::function<void()>& body) {
  try {
    body();
    return doq::cli::kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return doq::cli::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return doq::cli::kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decision-oriented quantization experiments"};
  app.require_subcommand(1);

  doq::cli::CommonOptions common;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  const auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* cfg = cmd->add_option("--config", common.config_path, "JSON experiment config");
    if (needs_config) cfg->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed_flag, "master seed (overrides the config seed)")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_option("--out", common.out_path, "output path (CSV, or model file for train-nn)");
  };

  // thresholds takes its three parameters directly
  auto* thresholds = app.add_subcommand("thresholds", "analytic single-band EE thresholds");
  std::vector<double> powers;
  double c = 1.0, sigma2 = 1.0;
  thresholds->add_option("--powers", powers, "ascending power levels, mW")
      ->required()
      ->delimiter(',');
  thresholds->add_option("--c", c, "spectral-efficiency constant")->required();
  thresholds->add_option("--sigma2", sigma2, "noise variance, mW")->required();
  add_common(thresholds, false);

  auto* regions = app.add_subcommand("regions", "2-band decision-region grid as CSV");
  add_common(regions, true);

  auto* compression =
      app.add_subcommand("compression", "compression rate vs optimality loss curve");
  add_common(compression, true);

  auto* mimo = app.add_subcommand("mimo", "average utility vs decision-set size");
  add_common(mimo, true);

  auto* train_nn = app.add_subcommand("train-nn", "train the classifier quantizer");
  add_common(train_nn, true);

  auto* eval = app.add_subcommand("eval", "evaluate a quantizer against its oracle");
  std::string model_override;
  eval->add_option("--model", model_override, "model file (overrides eval.quantizer.model)");
  add_common(eval, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // CLI11 exits 0 for --help; anything else is an argument problem
    return code == 0 ? doq::cli::kExitOk : doq::cli::kExitValidation;
  }

  if (seed_given) common.seed = seed_flag;

  if (thresholds->parsed()) {
    return guarded([&] {
      doq::cli::run_thresholds(powers, c, sigma2, common.out_path, common.seed.value_or(0));
    });
  }
  if (regions->parsed()) return guarded([&] { doq::cli::run_regions(common); });
  if (compression->parsed()) return guarded([&] { doq::cli::run_compression(common); });
  if (mimo->parsed()) return guarded([&] { doq::cli::run_mimo(common); });
  if (train_nn->parsed()) return guarded([&] { doq::cli::run_train_nn(common); });
  if (eval->parsed()) return guarded([&] { doq::cli::run_eval(common, model_override); });
  return doq::cli::kExitValidation;
}
