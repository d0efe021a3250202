#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cylspectra/coeffs.hpp"
#include "cylspectra/eigensolve.hpp"
#include "cylspectra/mesh.hpp"

namespace cylspectra {

inline constexpr const char* kToolVersion = "cylspectra 0.1.0";

enum class Experiment { Solve, Sweep, NuLadder, Spectrum, GapCheck, Decay, Beta2, Report };

/// Command-line name ("solve", "sweep", "ladder", ...).
const char* command_name(Experiment e);
/// Inverse of command_name; throws ConfigError for unknown names.
Experiment parse_experiment(const std::string& name);

enum class SolveDomain { Mixed, Dirichlet, HalfPlus, HalfMinus };

struct ExperimentConfig {
  Experiment experiment = Experiment::Solve;
  CoefficientFamily family;
  /// Swap the half-cylinder sides by negating a12.
  bool reflect = false;
  double p = 2.0;
  std::vector<double> ells;
  Resolution resolution;
  SolveOptions solver;
  std::filesystem::path output_dir = "runs";
  unsigned seed = 0;

  SolveDomain domain = SolveDomain::Mixed;  // solve
  Side side = Side::Plus;                   // ladder
  int k = 3;                                // spectrum
  std::vector<double> eps = {0.1, 0.05, 0.01};  // gap-check
  double truncation = 0.0;                  // gap-check; 0 means 10 / eps
  std::vector<std::filesystem::path> inputs;    // report

  /// The document as read, echoed into the manifest.
  nlohmann::json source;
};

/// Validates a config document. Relative paths resolve against `base_dir`.
/// Unknown keys and out-of-range values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// Reads and parses a config file; a missing or malformed file is a
/// ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  int threads = 1;
  /// Overrides the config's output_dir when nonempty.
  std::filesystem::path output_dir;
};

struct RunManifest {
  nlohmann::json config;
  std::string version = kToolVersion;
  std::string experiment;
  std::string started;
  std::string finished;
  std::filesystem::path run_dir;
  std::vector<std::string> outputs;
  /// label -> converged
  std::vector<std::pair<std::string, bool>> convergence;

  nlohmann::json to_json() const;
};

/// Runs one experiment into a fresh subdirectory of the output directory and
/// writes manifest.json last.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Loads `path` and runs it; `command` must agree with the config's
/// "experiment" key when that key is present.
RunManifest run_config(const std::filesystem::path& path, Experiment command,
                       const RunOptions& options);

/// Text and CSV summary of the given manifests (sweep runs are analysed;
/// other runs are listed). Missing inputs are reported as absent.
struct ReportText {
  std::string text;
  std::string csv;
};
ReportText build_report(const std::vector<std::filesystem::path>& manifests);

/// printf("%.17g") with "nan"/"inf" spelled out.
std::string format_number(double v);

/// Writes `content` to `path` through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Thread count from an explicit value (> 0) or CYLSPECTRA_THREADS, else 1.
int resolve_threads(int requested);

}  // namespace cylspectra
