// Command-line front end: one subcommand per experiment, each driven by a
// JSON config file.

#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "cylspectra/errors.hpp"
#include "cylspectra/runner.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Subcommand {
  cylspectra::Experiment experiment;
  const char* help;
};

constexpr Subcommand kSubcommands[] = {
    {cylspectra::Experiment::Solve, "Single eigenpair on one domain"},
    {cylspectra::Experiment::Sweep, "Mixed, Dirichlet and half-cylinder eigenvalues over a length ladder"},
    {cylspectra::Experiment::NuLadder, "Half-cylinder ladder and its extrapolated limit"},
    {cylspectra::Experiment::Spectrum, "Lowest k eigenvalues of the linear problem (p = 2)"},
    {cylspectra::Experiment::GapCheck, "Cross-section integrals and exponential test quotients"},
    {cylspectra::Experiment::Decay, "Slab energies and decay-rate fits"},
    {cylspectra::Experiment::Beta2, "Second-eigenvalue upper bound from the half cylinders"},
    {cylspectra::Experiment::Report, "Summarise earlier runs from their manifests"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Principal eigenvalues of anisotropic p-Laplacians on long cylinders"};
  app.set_version_flag("--version", std::string(cylspectra::kToolVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int threads = 0;
  for (const Subcommand& s : kSubcommands) {
    CLI::App* sub = app.add_subcommand(cylspectra::command_name(s.experiment), s.help);
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--output-dir", output_dir, "Overrides output_dir from the config");
    sub->add_option("--threads", threads, "Worker threads (default: CYLSPECTRA_THREADS or 1)")
        ->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    cylspectra::Experiment command = cylspectra::Experiment::Solve;
    for (const Subcommand& s : kSubcommands) {
      if (app.got_subcommand(cylspectra::command_name(s.experiment))) command = s.experiment;
    }
    cylspectra::RunOptions options;
    options.threads = threads;
    options.output_dir = output_dir;
    const cylspectra::RunManifest manifest = cylspectra::run_config(config_path, command, options);
    std::printf("%s\n", manifest.run_dir.string().c_str());
    bool all = true;
    for (const auto& c : manifest.convergence) all = all && c.second;
    if (!all) std::fprintf(stderr, "warning: some solves did not converge; see manifest.json\n");
    return 0;
  } catch (const cylspectra::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const cylspectra::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
}
