#include "haid/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "haid/csvio.hpp"
#include "haid/rng.hpp"

namespace haid {

namespace fs = std::filesystem;

std::vector<std::string> expand_scenarios(const std::string& text) {
  std::vector<std::string> out;
  auto push_unique = [&out](const std::string& id) {
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  };
  std::istringstream is(text);
  std::string token;
  while (std::getline(is, token, ',')) {
    token.erase(std::remove_if(token.begin(), token.end(), ::isspace),
                token.end());
    if (token.empty()) continue;
    if (token == "all") {
      for (const std::string& id : standard_scenario_ids()) push_unique(id);
      continue;
    }
    const std::size_t dots = token.find("..");
    if (dots != std::string::npos) {
      const std::string a = token.substr(0, dots);
      const std::string b = token.substr(dots + 2);
      if (a.size() < 2 || b.size() < 2 || a[0] != 'S' || b[0] != 'S') {
        throw ConfigException({0, "scenarios", "bad range '" + token + "'"});
      }
      const int lo = std::stoi(a.substr(1));
      const int hi = std::stoi(b.substr(1));
      if (lo > hi || lo < 0 || hi > 9) {
        throw ConfigException({0, "scenarios", "bad range '" + token + "'"});
      }
      for (int i = lo; i <= hi; ++i) push_unique("S" + std::to_string(i));
      continue;
    }
    standard_scenario(token);  // validates the id
    push_unique(token);
  }
  if (out.empty()) {
    throw ConfigException({0, "scenarios", "no scenarios requested"});
  }
  return out;
}

RunOptions options_from_config(const ConfigMap& cfg) {
  RunOptions opt;
  opt.n = cfg.get_int("run.n", opt.n);
  opt.seed = static_cast<std::uint64_t>(
      cfg.get_double("run.seed", static_cast<double>(opt.seed)));
  opt.scenarios = expand_scenarios(cfg.get_string("run.scenarios", "S0"));
  opt.noise = cfg.get_bool("run.noise", opt.noise);
  opt.out_dir = cfg.get_string("run.out", opt.out_dir);
  opt.workers = cfg.get_int("run.workers", opt.workers);
  opt.personalize = cfg.get_bool("run.personalize", opt.personalize);

  opt.cohort.cv = cfg.get_double("cohort.cv", opt.cohort.cv);
  opt.cohort.bw_lo = cfg.get_double("cohort.bw_lo", opt.cohort.bw_lo);
  opt.cohort.bw_hi = cfg.get_double("cohort.bw_hi", opt.cohort.bw_hi);
  opt.cohort.basal_share =
      cfg.get_double("cohort.basal_share", opt.cohort.basal_share);

  MpcConfig& m = opt.controller.mpc;
  m.Np = cfg.get_int("mpc.np", m.Np);
  m.Nc = cfg.get_int("mpc.nc", m.Nc);
  m.r = cfg.get_double("mpc.r", m.r);
  m.Q_weight = cfg.get_double("mpc.q_weight", m.Q_weight);
  m.R_weight = cfg.get_double("mpc.r_weight", m.R_weight);
  m.N_tdi_min = cfg.get_double("mpc.n_tdi_min", m.N_tdi_min);
  m.N_tdi_max = cfg.get_double("mpc.n_tdi_max", m.N_tdi_max);
  m.N_roc_high = cfg.get_double("mpc.n_roc_high", m.N_roc_high);
  m.delta_u_min = cfg.get_double("mpc.delta_u_min", m.delta_u_min);
  m.delta_u_max = cfg.get_double("mpc.delta_u_max", m.delta_u_max);
  m.Ts = cfg.get_double("mpc.ts", m.Ts);
  m.low_glucose_floor =
      cfg.get_double("mpc.low_glucose_floor", m.low_glucose_floor);
  m.validate();

  CorrectionGate& g = opt.controller.gate;
  g.bg_threshold = cfg.get_double("gate.bg_threshold", g.bg_threshold);
  g.min_since_meal = cfg.get_double("gate.min_since_meal", g.min_since_meal);
  g.min_since_correction =
      cfg.get_double("gate.min_since_correction", g.min_since_correction);
  opt.controller.bolus_target =
      cfg.get_double("bolus.target", opt.controller.bolus_target);

  opt.noise_cfg.sd = cfg.get_double("noise.sd", 2.0);
  opt.noise_cfg.ar1 = cfg.get_double("noise.ar1", opt.noise_cfg.ar1);

  FitConfig& f = opt.fitcfg;
  f.lo_factor = cfg.get_double("fit.lo_factor", f.lo_factor);
  f.hi_factor = cfg.get_double("fit.hi_factor", f.hi_factor);
  f.starts = cfg.get_int("fit.starts", f.starts);
  f.max_evals_per_start = cfg.get_int("fit.max_evals", f.max_evals_per_start);
  f.diameter_tol = cfg.get_double("fit.tol", f.diameter_tol);

  opt.s8_initial_glucose =
      cfg.get_double("scenario.s8.initial_glucose", opt.s8_initial_glucose);
  opt.s9_initial_glucose =
      cfg.get_double("scenario.s9.initial_glucose", opt.s9_initial_glucose);

  const std::vector<std::string> unread = cfg.unread_keys();
  if (!unread.empty()) {
    throw ConfigException({0, unread.front(), "unknown configuration key"});
  }
  // the hash identifies the result-determining inputs; where the artifacts
  // land and how many threads produced them are not part of that identity
  std::ostringstream canon;
  for (const auto& [key, value] : cfg.entries()) {
    if (key == "run.out" || key == "run.workers") continue;
    canon << key << '=' << value << '\n';
  }
  opt.config_canonical = canon.str();
  return opt;
}

namespace {

std::uint64_t run_seed_for(std::uint64_t master, int subject,
                           const std::string& scenario) {
  return derive_seed(master, static_cast<std::uint64_t>(subject) + 101,
                     fnv1a_hash(scenario));
}

ScenarioSpec spec_for(const RunOptions& opt, const std::string& id) {
  ScenarioSpec spec = standard_scenario(id);
  if (id == "S8") spec.initial_glucose = opt.s8_initial_glucose;
  if (id == "S9") spec.initial_glucose = opt.s9_initial_glucose;
  return spec;
}

RunModuleConfigs module_configs(const RunOptions& opt) {
  RunModuleConfigs cfgs;
  cfgs.controller = opt.controller;
  if (opt.noise) {
    cfgs.noise = opt.noise_cfg;
    cfgs.ekf_sensor_sd = opt.noise_cfg.sd;
  }
  return cfgs;
}

void parallel_for(int n_jobs, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n_jobs));
  if (workers == 1) {
    for (int i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_jobs) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string trace_filename(int subject, const std::string& scenario) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", subject);
  return "trace_subj" + std::string(buf) + "_" + scenario + ".csv";
}

CsvTable trace_to_csv(const SimulationTrace& trace) {
  CsvTable t;
  t.comments.push_back("# scenario=" + trace.scenario_id +
                       " subject=" + std::to_string(trace.subject_index) +
                       " seed=" + hex64(trace.seed));
  t.header = {"t_min",        "plant_bg",      "cgm",
              "roc",          "iob",           "bound_lo",
              "bound_hi",     "basal_uh",      "prandial_u",
              "correction_u", "meal_true_g",   "meal_announced_g",
              "rescue_g",     "qp_iterations", "degraded",
              "ekf_rejected"};
  for (const TraceRow& r : trace.rows) {
    t.rows.push_back({format_double(r.t), format_double(r.plant_bg),
                      format_double(r.cgm), format_double(r.roc),
                      format_double(r.iob), format_double(r.bound_lo),
                      format_double(r.bound_hi), format_double(r.basal_uh),
                      format_double(r.prandial_u),
                      format_double(r.correction_u),
                      format_double(r.meal_true_g),
                      format_double(r.meal_announced_g),
                      format_double(r.rescue_g),
                      std::to_string(r.qp_iterations),
                      std::to_string(r.degraded),
                      std::to_string(r.ekf_rejected)});
  }
  return t;
}

struct MetricColumn {
  std::string name;
  double (*get)(const GlycemicReport&);
};

const std::vector<MetricColumn>& metric_columns() {
  static const std::vector<MetricColumn> cols = {
      {"tir", [](const GlycemicReport& r) { return r.range.TIR; }},
      {"titr", [](const GlycemicReport& r) { return r.range.TITR; }},
      {"tar", [](const GlycemicReport& r) { return r.range.TAR; }},
      {"tar_gt250", [](const GlycemicReport& r) { return r.range.TAR_gt250; }},
      {"tbr", [](const GlycemicReport& r) { return r.range.TBR; }},
      {"tbr_lt54", [](const GlycemicReport& r) { return r.range.TBR_lt54; }},
      {"mean_bg", [](const GlycemicReport& r) { return r.var.mean_bg; }},
      {"cv", [](const GlycemicReport& r) { return r.var.CV; }},
      {"hbgi", [](const GlycemicReport& r) { return r.var.HBGI; }},
      {"lbgi", [](const GlycemicReport& r) { return r.var.LBGI; }},
      {"hypo_events",
       [](const GlycemicReport& r) { return double(r.event.hypo); }},
      {"hyper_events",
       [](const GlycemicReport& r) { return double(r.event.hyper); }},
      {"hypo_per_day", [](const GlycemicReport& r) { return r.hypo_per_day; }},
      {"hyper_per_day",
       [](const GlycemicReport& r) { return r.hyper_per_day; }},
      {"tdi", [](const GlycemicReport& r) { return r.insulin.TDI; }},
      {"tdi_per_kg",
       [](const GlycemicReport& r) { return r.insulin.TDI_per_kg; }},
      {"basal_pct", [](const GlycemicReport& r) { return r.insulin.basal_pct; }},
      {"bolus_pct", [](const GlycemicReport& r) { return r.insulin.bolus_pct; }},
      {"prandial_pct",
       [](const GlycemicReport& r) { return r.insulin.prandial_pct; }},
      {"correction_pct",
       [](const GlycemicReport& r) { return r.insulin.correction_pct; }},
  };
  return cols;
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  if (v.size() == 1) return v[0];
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

}  // namespace

RunArtifacts run_pipeline(const RunOptions& opt) {
  if (opt.n < 1) {
    throw ConfigException({0, "run.n", "cohort size must be >= 1"});
  }
  fs::create_directories(opt.out_dir);

  RunArtifacts art;
  art.config_hash = fnv1a_hash(opt.config_canonical);
  art.cohort = generate_cohort(opt.n, opt.seed, opt.cohort);

  const RunModuleConfigs cfgs = module_configs(opt);

  // training + personalization (fitted parameters persist across scenarios)
  std::vector<SimulationTrace> train_traces(art.cohort.size());
  art.fits.resize(opt.personalize ? art.cohort.size() : 0);
  {
    const ScenarioSpec train_spec = spec_for(opt, "TRAIN");
    parallel_for(
        static_cast<int>(art.cohort.size()), opt.workers, [&](int i) {
          VirtualSubject& subj = art.cohort[i];
          const std::uint64_t rs = run_seed_for(opt.seed, i, "TRAIN");
          train_traces[i] = run_scenario(train_spec, subj, cfgs, rs);
          if (opt.personalize) {
            const FitInputs inputs = fit_inputs_from_trace(
                train_traces[i], opt.controller.mpc.Ts);
            FitConfig fc = opt.fitcfg;
            fc.seed = derive_seed(opt.seed, 0x77, i);
            art.fits[i] = fit(inputs, subj.controller_params, fc);
            art.fits[i].params.BW = subj.plant_params.BW;
            subj.controller_params = art.fits[i].params;
          }
        });
  }

  // scenario fan-out
  struct Job {
    int subject;
    std::string scenario;
  };
  std::vector<Job> jobs;
  for (const std::string& id : opt.scenarios) {
    for (int i = 0; i < opt.n; ++i) jobs.push_back({i, id});
  }
  std::vector<RunEntry> entries(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), opt.workers, [&](int j) {
    const Job& job = jobs[j];
    RunEntry& e = entries[j];
    e.subject = job.subject;
    e.scenario = job.scenario;
    if (job.scenario == "TRAIN") {
      e.trace = train_traces[job.subject];
    } else {
      const ScenarioSpec spec = spec_for(opt, job.scenario);
      const std::uint64_t rs = run_seed_for(opt.seed, job.subject, job.scenario);
      e.trace = run_scenario(spec, art.cohort[job.subject], cfgs, rs);
    }
    e.report = compute_report(e.trace);
  });
  art.entries = std::move(entries);

  for (const RunEntry& e : art.entries) art.warnings += e.trace.degraded_steps;

  // trace files
  for (const RunEntry& e : art.entries) {
    const std::string name = trace_filename(e.subject, e.scenario);
    write_csv((fs::path(opt.out_dir) / name).string(), trace_to_csv(e.trace));
    art.files.push_back(name);
  }

  // per-run report table
  {
    CsvTable rep;
    rep.header = {"subject", "scenario"};
    for (const MetricColumn& c : metric_columns()) rep.header.push_back(c.name);
    rep.header.push_back("rescue_count");
    rep.header.push_back("degraded_steps");
    for (const RunEntry& e : art.entries) {
      std::vector<std::string> row = {std::to_string(e.subject), e.scenario};
      for (const MetricColumn& c : metric_columns()) {
        row.push_back(format_double(c.get(e.report)));
      }
      int rescues = 0;
      for (const MealEvent& m : e.trace.meals) {
        if (m.slot == MealSlot::kRescue) ++rescues;
      }
      row.push_back(std::to_string(rescues));
      row.push_back(std::to_string(e.trace.degraded_steps));
      rep.rows.push_back(row);
    }
    write_csv((fs::path(opt.out_dir) / "report.csv").string(), rep);
    art.files.push_back("report.csv");
  }

  // cohort aggregate per scenario
  {
    CsvTable sum;
    sum.header = {"scenario", "metric", "median", "q1", "q3", "mean", "sd"};
    for (const std::string& id : opt.scenarios) {
      std::vector<const GlycemicReport*> reps;
      for (const RunEntry& e : art.entries) {
        if (e.scenario == id) reps.push_back(&e.report);
      }
      if (reps.empty()) continue;
      for (const MetricColumn& c : metric_columns()) {
        std::vector<double> vals;
        vals.reserve(reps.size());
        for (const GlycemicReport* r : reps) vals.push_back(c.get(*r));
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double sd = 0.0;
        if (vals.size() > 1) {
          double ss = 0.0;
          for (double v : vals) ss += (v - mean) * (v - mean);
          sd = std::sqrt(ss / (static_cast<double>(vals.size()) - 1.0));
        }
        sum.rows.push_back({id, c.name, format_double(quantile(vals, 0.5)),
                            format_double(quantile(vals, 0.25)),
                            format_double(quantile(vals, 0.75)),
                            format_double(mean), format_double(sd)});
      }
      // consensus-target attainment shares across the cohort
      const struct {
        const char* name;
        bool (*ok)(const GlycemicReport&);
      } flags[] = {
          {"share_tir_gt70",
           [](const GlycemicReport& r) { return r.range.TIR > 70.0; }},
          {"share_tbr_lt4",
           [](const GlycemicReport& r) { return r.range.TBR < 4.0; }},
          {"share_tar_lt25",
           [](const GlycemicReport& r) { return r.range.TAR < 25.0; }},
          {"share_tar250_lt5",
           [](const GlycemicReport& r) { return r.range.TAR_gt250 < 5.0; }},
      };
      for (const auto& flag : flags) {
        double share = 0.0;
        for (const GlycemicReport* r : reps) {
          if (flag.ok(*r)) share += 1.0;
        }
        share *= 100.0 / static_cast<double>(reps.size());
        const std::string s = format_double(share);
        sum.rows.push_back({id, flag.name, s, s, s, s, "0"});
      }
    }
    write_csv((fs::path(opt.out_dir) / "summary.csv").string(), sum);
    art.files.push_back("summary.csv");
  }

  // personalization records
  if (opt.personalize) {
    CsvTable ft;
    ft.header = {"subject",   "rmse",     "evaluations", "converged",
                 "bound_active", "top_spread", "k_e",      "v_g_per_kg",
                 "si1",       "si2",      "tau_d",       "tau_s"};
    for (std::size_t i = 0; i < art.fits.size(); ++i) {
      const FitResult& f = art.fits[i];
      ft.rows.push_back({std::to_string(i), format_double(f.rmse),
                         std::to_string(f.evaluations),
                         std::to_string(f.converged ? 1 : 0),
                         std::to_string(f.bound_active ? 1 : 0),
                         format_double(f.top_spread),
                         format_double(f.params.k_e),
                         format_double(f.params.V_G_per_kg),
                         format_double(f.params.SI1),
                         format_double(f.params.SI2),
                         format_double(f.params.tau_D),
                         format_double(f.params.tau_S)});
    }
    write_csv((fs::path(opt.out_dir) / "fits.csv").string(), ft);
    art.files.push_back("fits.csv");
  }

  // cohort record
  {
    CsvTable co;
    co.header = {"subject", "bw",        "u_basal_uh", "tdi_basal",
                 "cr",      "cf",        "k12",        "egp0_per_kg",
                 "si1",     "si2",       "si3",        "tau_s",
                 "tau_d",   "k_e",       "v_g_per_kg", "seed"};
    for (const VirtualSubject& s : art.cohort) {
      const PatientParameters& p = s.plant_params;
      co.rows.push_back(
          {std::to_string(s.index), format_double(p.BW),
           format_double(s.profile.u_basal), format_double(s.profile.TDI_basal),
           format_double(s.profile.CR), format_double(s.profile.CF),
           format_double(p.k12), format_double(p.EGP0_per_kg),
           format_double(p.SI1), format_double(p.SI2), format_double(p.SI3),
           format_double(p.tau_S), format_double(p.tau_D), format_double(p.k_e),
           format_double(p.V_G_per_kg), hex64(s.seed)});
    }
    write_csv((fs::path(opt.out_dir) / "cohort.csv").string(), co);
    art.files.push_back("cohort.csv");
  }

  // manifest
  {
    std::ostringstream mf;
    mf << "config_hash=" << hex64(art.config_hash) << '\n';
    mf << "n=" << opt.n << '\n';
    mf << "noise=" << (opt.noise ? 1 : 0) << '\n';
    mf << "personalize=" << (opt.personalize ? 1 : 0) << '\n';
    std::string scen_list;
    for (const std::string& id : opt.scenarios) {
      if (!scen_list.empty()) scen_list += ",";
      scen_list += id;
    }
    mf << "scenarios=" << scen_list << '\n';
    mf << "seed=" << opt.seed << '\n';
    mf << "warnings=" << art.warnings << '\n';
    mf << "workers=" << opt.workers << '\n';
    for (const std::string& id : opt.scenarios) {
      for (int i = 0; i < opt.n; ++i) {
        mf << "run_seed." << id << "." << i << "="
           << hex64(run_seed_for(opt.seed, i, id)) << '\n';
      }
    }
    std::ofstream f(fs::path(opt.out_dir) / "manifest.txt", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write manifest");
    f << mf.str();
    art.files.push_back("manifest.txt");
  }

  return art;
}

VerifyResult verify_runs(const std::string& golden_dir,
                         const std::string& fresh_dir, double tol) {
  VerifyResult out;
  auto manifest_value = [](const std::string& dir,
                           const std::string& key) -> std::string {
    std::ifstream f(fs::path(dir) / "manifest.txt");
    if (!f) throw std::runtime_error("missing manifest in " + dir);
    std::string line;
    while (std::getline(f, line)) {
      if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
    }
    return "";
  };

  const std::string ha = manifest_value(golden_dir, "config_hash");
  const std::string hb = manifest_value(fresh_dir, "config_hash");
  if (ha.empty() || hb.empty() || ha != hb) {
    out.ok = false;
    out.detail = "config hashes differ (" + ha + " vs " + hb + ")";
    return out;
  }

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(golden_dir)) {
    if (entry.path().extension() == ".csv") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  for (const std::string& name : names) {
    const fs::path fresh = fs::path(fresh_dir) / name;
    if (!fs::exists(fresh)) {
      out.ok = false;
      out.detail = name + " missing from " + fresh_dir;
      return out;
    }
    const CsvDivergence d =
        compare_csv((fs::path(golden_dir) / name).string(), fresh.string(), tol);
    if (d.diverged) {
      out.ok = false;
      std::ostringstream os;
      os << name << " row " << d.row << " column " << d.column << ": "
         << d.detail;
      out.detail = os.str();
      return out;
    }
  }
  return out;
}

}  // namespace haid
