#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haid/config.hpp"
#include "haid/metrics.hpp"
#include "haid/personalize.hpp"
#include "haid/scenario.hpp"

namespace haid {

struct RunOptions {
  int n = 10;
  std::uint64_t seed = 1;
  std::vector<std::string> scenarios = {"S0"};
  bool noise = false;
  std::string out_dir = "out";
  int workers = 4;
  bool personalize = true;
  CohortConfig cohort;
  ControllerConfig controller;
  NoiseConfig noise_cfg;       // applied when `noise` is set
  FitConfig fitcfg;
  double s8_initial_glucose = 60.0;
  double s9_initial_glucose = 250.0;
  std::string config_canonical;  // hashed into the manifest
};

/// Expands "S0..S9", "all", and comma lists into scenario ids.
std::vector<std::string> expand_scenarios(const std::string& text);

/// Applies recognized keys onto defaults; throws ConfigException for
/// malformed values or unknown keys.
RunOptions options_from_config(const ConfigMap& cfg);

struct RunEntry {
  int subject = 0;
  std::string scenario;
  GlycemicReport report;
  SimulationTrace trace;
};

struct RunArtifacts {
  std::vector<std::string> files;  // paths written, relative to out_dir
  int warnings = 0;
  std::uint64_t config_hash = 0;
  std::vector<RunEntry> entries;
  std::vector<VirtualSubject> cohort;  // controller params post-fit
  std::vector<FitResult> fits;         // empty when personalization is off
};

/// Cohort build, training + personalization, scenario fan-out, CSV emission.
/// Deterministic: identical options produce byte-identical artifacts.
RunArtifacts run_pipeline(const RunOptions& opt);

struct VerifyResult {
  bool ok = true;
  std::string detail;
};

/// Compares two run directories: manifests must carry the same config hash,
/// every CSV must match within the tolerance.
VerifyResult verify_runs(const std::string& golden_dir,
                         const std::string& fresh_dir, double tol);

}  // namespace haid
