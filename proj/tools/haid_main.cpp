#include <unistd.h>

#include <cctype>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "haid/config.hpp"
#include "haid/pipeline.hpp"

namespace {

// environment overrides: HAID_MPC__NP=6 maps to key "mpc.np"
void apply_env_overrides(haid::ConfigMap& cfg, char** envp) {
  if (!envp) return;
  const std::string prefix = "HAID_";
  for (char** e = envp; *e; ++e) {
    std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(0, eq);
    if (name.rfind(prefix, 0) != 0) continue;
    name = name.substr(prefix.size());
    std::string key;
    for (std::size_t i = 0; i < name.size(); ++i) {
      if (name[i] == '_' && i + 1 < name.size() && name[i + 1] == '_') {
        key += '.';
        ++i;
      } else {
        key += static_cast<char>(std::tolower(name[i]));
      }
    }
    cfg.set(key, entry.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid closed-loop insulin delivery simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string scenarios;
  int n = -1;
  std::string seed_text;
  bool noise = false;
  bool no_noise = false;
  std::string out_dir;
  int workers = -1;

  CLI::App* run = app.add_subcommand("run", "simulate scenarios for a cohort");
  run->add_option("--config", config_path, "key=value configuration file");
  run->add_option("--scenarios", scenarios,
                  "comma list, ranges allowed (S0..S9, all, TRAIN)");
  run->add_option("--n", n, "cohort size");
  run->add_option("--seed", seed_text, "master seed");
  run->add_flag("--noise", noise, "enable CGM sensor noise");
  run->add_flag("--no-noise", no_noise, "disable CGM sensor noise");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--workers", workers, "parallel workers");

  std::string golden_dir, fresh_dir;
  double tol = 1e-9;
  CLI::App* verify =
      app.add_subcommand("verify", "compare two run directories");
  verify->add_option("golden", golden_dir, "reference directory")->required();
  verify->add_option("fresh", fresh_dir, "directory under test")->required();
  verify->add_option("--tol", tol, "absolute numeric tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      haid::ConfigMap cfg;
      if (!config_path.empty()) {
        cfg = haid::ConfigMap::parse_file(config_path);
      }
      apply_env_overrides(cfg, environ);
      // flags win over file and environment
      if (!scenarios.empty()) cfg.set("run.scenarios", scenarios);
      if (n >= 0) cfg.set("run.n", std::to_string(n));
      if (!seed_text.empty()) cfg.set("run.seed", seed_text);
      if (noise) cfg.set("run.noise", "1");
      if (no_noise) cfg.set("run.noise", "0");
      if (!out_dir.empty()) cfg.set("run.out", out_dir);
      if (workers >= 1) cfg.set("run.workers", std::to_string(workers));

      const haid::RunOptions opt = haid::options_from_config(cfg);
      const haid::RunArtifacts art = haid::run_pipeline(opt);
      std::cout << "wrote " << art.files.size() << " files to " << opt.out_dir
                << " (warnings: " << art.warnings << ")\n";
      return 0;
    }
    if (verify->parsed()) {
      const haid::VerifyResult res =
          haid::verify_runs(golden_dir, fresh_dir, tol);
      if (res.ok) {
        std::cout << "directories match within tolerance " << tol << "\n";
        return 0;
      }
      std::cerr << "mismatch: " << res.detail << "\n";
      return 1;
    }
  } catch (const haid::ConfigException& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
