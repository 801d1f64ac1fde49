#pragma once

#include "iplpmb/gaussian.hpp"
#include "iplpmb/linearization.hpp"
#include "iplpmb/monte_carlo.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace iplpmb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;

struct RunOptions {
  std::filesystem::path config_path;  // empty: built-in defaults
  Linearizer linearizer = Linearizer::Posterior;
  int runs = 1;
  std::optional<std::uint64_t> seed;  // overrides scenario.seed
  std::optional<int> gamma;           // overrides filter.gamma
  std::filesystem::path out_dir;
  int threads = 1;
};

[[nodiscard]] std::string filter_name(Linearizer l);

/// Runs the Monte Carlo experiment and writes CSVs plus manifest.json (last) into
/// out_dir. Returns an exit code; diagnostics go to `err`.
int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);

/// Side-by-side table of two run directories (B - A deltas). Writes plain text to
/// `out` and, if csv_path is set, the same table as CSV. Throws MissingManifest.
void cmd_compare(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b, std::ostream& out,
                 const std::optional<std::filesystem::path>& csv_path = std::nullopt);

/// Scalar example h(x) = -0.1 x^2 + 3, R = 0.1, prior N(3, 4), z = 0.5.
struct Fig2Report {
  GaussianDensity prior;
  GaussianDensity ekf;
  std::vector<GaussianDensity> iplf_iterates;  // posterior after each iteration
  IplfResult iplf;
  double grid_mean = 0.0;
  double grid_var = 0.0;
  double kl_ekf = 0.0;   // KL(true posterior || EKF posterior)
  double kl_iplf = 0.0;  // KL(true posterior || IPLF posterior)
};

[[nodiscard]] Fig2Report fig2_demo();
/// Prints the report; returns kExitOk iff the IPLF posterior is closer to the truth.
int cmd_fig2(std::ostream& out);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace iplpmb::cli
