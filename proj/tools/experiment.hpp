#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace doq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;  // --seed overrides the config seed
  std::string out_path;               // CSV (or model file for train-nn)
};

// Command bodies. Validation problems raise std::invalid_argument, runtime
// and numeric failures std::runtime_error; main() maps them to exit codes.
void run_thresholds(const std::vector<double>& powers, double c, double sigma2,
                    const std::string& out_path, std::uint64_t seed);
void run_regions(const CommonOptions& opt);
void run_compression(const CommonOptions& opt);
void run_mimo(const CommonOptions& opt);
void run_train_nn(const CommonOptions& opt);
void run_eval(const CommonOptions& opt, const std::string& model_override);

}  // namespace doq::cli
