// Command-line front end: hsim run <config> [--out DIR] [--check], hsim verify <config>,
// hsim --print-defaults. Exit codes: 0 success, 2 a check failed, 1 runtime error.

#include <chrono>
#include <iostream>

#include <CLI11.hpp>

#include "hsim/error.hpp"
#include "hsim/experiment.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out, bool check_only) {
  const hsim::Json user = hsim::load_config_file(config_path);
  const hsim::ExperimentConfig cfg = hsim::parse_config(user);
  if (check_only) {
    std::cout << "config ok: kind " << hsim::to_string(cfg.kind) << ", hash "
              << hsim::hash_hex(hsim::config_hash(cfg.normalized)) << ", " << cfg.sweep.size() << " sweep entries\n";
    return 0;
  }
  std::optional<std::filesystem::path> override_dir;
  if (!out.empty()) override_dir = out;
  const auto start = std::chrono::steady_clock::now();
  const auto results = hsim::run_config(user, override_dir);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = true;
  for (const auto& r : results) {
    std::cout << r.out_dir.string() << " (" << hsim::to_string(r.kind) << ")\n";
    for (const auto& c : r.checks)
      std::cout << "  " << c.name << ": " << (c.pass ? "pass" : "fail") << "  value " << hsim::format_double(c.value)
                << "  threshold " << hsim::format_double(c.threshold) << "\n";
    ok = ok && r.all_pass();
  }
  std::cerr << "elapsed " << seconds << " s\n";
  return ok ? 0 : 2;
}

int verify_command(const std::string& config_path) {
  const hsim::ExperimentConfig cfg = hsim::parse_config(hsim::load_config_file(config_path));
  const hsim::HypothesisReport h = hsim::check_hypotheses(cfg.flux);
  const hsim::Json report{{"div_max", h.div_max},
                          {"div_ok", h.div_ok},
                          {"growth_exponent", h.growth_exponent},
                          {"growth_limit", h.growth_limit},
                          {"growth_ok", h.growth_ok},
                          {"pass", h.pass()},
                          {"message", h.message}};
  std::cout << report.dump(2) << "\n";
  if (!h.pass()) std::cerr << hsim::Error(hsim::ErrorKind::HypothesisViolated, h.message).what() << "\n";
  return h.pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homogenization and long-time asymptotics of periodic conservation laws"};
  app.set_version_flag("--version", std::string(hsim::version()));
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults, "Print the default configuration template and exit");

  std::string run_config, out_dir;
  bool check_only = false;
  auto* run = app.add_subcommand("run", "Run the experiment(s) described by a JSON config");
  run->add_option("config", run_config, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir and HSIM_OUTPUT_ROOT)");
  run->add_flag("--check", check_only, "Validate the config only");

  std::string verify_config;
  auto* verify = app.add_subcommand("verify", "Check the structural hypotheses of the configured flux");
  verify->add_option("config", verify_config, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (print_defaults) {
      std::cout << hsim::default_config().dump(2) << "\n";
      return 0;
    }
    if (*run) return run_command(run_config, out_dir, check_only);
    if (*verify) return verify_command(verify_config);
    std::cout << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
