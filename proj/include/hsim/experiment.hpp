#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsim/direct_sim.hpp"

namespace hsim {

using Json = nlohmann::ordered_json;

std::string_view version();

enum class ExperimentKind { cell_coeffs, profile, homogenized_evolution, full_convergence, linear_moments };

std::string_view to_string(ExperimentKind kind);

/// Profile target for the `profile` and `homogenized_evolution` kinds. When `eta` is
/// set the coefficients are taken as given; otherwise they come from the flux.
struct ProfileSpec {
  double mass = 1.0;
  ProfileGridOptions grid;
  std::optional<MatrixXd> eta;
  std::optional<double> a;
};

struct EvolutionSpec {
  double tau_end = 6.0;
  double dtau = 0.1;
  std::string initial = "box";  // box | gaussian
  double width = 2.0;           // box half width or Gaussian standard deviation
};

/// Thresholds of the checks reported in summary.json.
struct CheckSpec {
  double l1_decay_ratio = 0.2;  // diag_l1(t_end) / diag_l1(t_ref) must stay below
  double l1_reference_time = 1.0;
  double mass_drift = 1e-10;
  double cross_formula = 1e-8;
  double profile_residual = 1e-8;
  double profile_mass = 1e-10;
  double final_l1 = 1e-2;        // homogenized evolution, ||F(tau_end) - F_M||_1
  double monotone_after = 1.0;   // tau (evolution) or t (moments) where monotonicity starts
  double moment_ratio = 2.0;     // max / median of the moment series
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::cell_coeffs;
  std::string output_dir = "hsim_out";
  std::uint64_t seed = 0;
  FluxModel flux;
  bool check_hypotheses = true;
  int torus_points = 128;
  CellOptions cell;
  double q = 0.0;
  ProfileSpec profile;
  EvolutionSpec evolution;
  SimulationConfig simulation;  // flux, q and torus_points are mirrored from above
  std::optional<Perturbation> second_perturbation;  // enables the L1 contraction check
  CheckSpec checks;
  Json normalized;  // defaults merged in; source of the config hash
  std::vector<Json> sweep;
};

/// Complete configuration with every default filled in.
Json default_config();

/// Parses JSON text; syntax errors raise ConfigInvalid with line and column.
Json parse_config_text(const std::string& text, const std::string& source = "<config>");
Json load_config_file(const std::filesystem::path& path);

/// Merges `user` over the defaults and validates every field. Errors raise
/// ConfigInvalid naming the JSON path of the offending field.
ExperimentConfig parse_config(const Json& user);

/// 64-bit FNV-1a of the compact dump of the normalized config.
std::uint64_t config_hash(const Json& normalized);
std::string hash_hex(std::uint64_t h);

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::cell_coeffs;
  std::filesystem::path out_dir;
  std::vector<CheckResult> checks;
  Json summary;
  bool all_pass() const;
};

/// Output directory: `override_dir` if given, else output_dir resolved against
/// $HSIM_OUTPUT_ROOT when that is set and output_dir is relative.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::optional<std::filesystem::path>& override_dir = {});

/// Runs one experiment and writes its reports into `out_dir`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Runs the base config, or every sweep entry concurrently in subdirectories
/// sweep_000, sweep_001, ... of the output directory.
std::vector<ExperimentResult> run_config(const Json& user,
                                         const std::optional<std::filesystem::path>& override_dir = {});

/// Writes values with %.17g so that repeated runs give identical bytes.
std::string format_double(double x);

}  // namespace hsim
