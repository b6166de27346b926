#include "haid/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace haid {

double ScenarioSpec::bias_for_day(int day) const {
  if (basal_bias.empty()) return 1.0;
  if (basal_bias.size() == 1) return basal_bias[0];
  return basal_bias[std::min<std::size_t>(day, basal_bias.size() - 1)];
}

CcModel ScenarioSpec::cc_for_day(int day) const {
  if (cc_error.empty()) return CcModel::kNone;
  if (cc_error.size() == 1) return cc_error[0];
  return cc_error[std::min<std::size_t>(day, cc_error.size() - 1)];
}

void ScenarioSpec::validate() const {
  if (days < 1) throw std::invalid_argument("scenario length must be >= 1 day");
  for (double b : basal_bias) {
    if (!(b > 0.0)) throw std::invalid_argument("basal bias must be positive");
  }
  if (!(delay_lo >= 0.0 && delay_hi >= delay_lo)) {
    throw std::invalid_argument("announcement delay bounds out of order");
  }
}

ScenarioSpec standard_scenario(const std::string& id) {
  ScenarioSpec s;
  s.id = id;
  if (id == "S0") {
    s.days = 5;
    s.announce_delay = false;
  } else if (id == "S1") {
    s.days = 5;
    s.basal_bias = {1.25};
    s.announce_delay = true;
  } else if (id == "S2") {
    s.days = 5;
    s.basal_bias = {0.75};
    s.announce_delay = true;
  } else if (id == "S3") {
    s.days = 5;
    s.cc_error = {CcModel::kRandomOver};
    s.announce_delay = true;
  } else if (id == "S4") {
    s.days = 5;
    s.cc_error = {CcModel::kRandomUnder};
    s.announce_delay = true;
  } else if (id == "S5") {
    s.days = 5;
    s.basal_bias = {1.0, 1.25, 1.0, 0.75, 1.0};
    s.announce_delay = true;
  } else if (id == "S6") {
    s.days = 5;
    s.cc_error = {CcModel::kRandomSym, CcModel::kSystematicOver,
                  CcModel::kRandomSym, CcModel::kSystematicUnder,
                  CcModel::kRandomSym};
    s.announce_delay = true;
  } else if (id == "S7") {
    s.days = 5;
    s.basal_bias = {1.0, 1.25, 1.0, 0.75, 1.0};
    s.cc_error = {CcModel::kRandomSym, CcModel::kSystematicOver,
                  CcModel::kRandomSym, CcModel::kSystematicUnder,
                  CcModel::kRandomSym};
    s.announce_delay = true;
  } else if (id == "S8") {
    s.days = 1;
    s.announce_delay = true;
    s.initial_glucose = 60.0;
  } else if (id == "S9") {
    s.days = 1;
    s.announce_delay = true;
    s.initial_glucose = 250.0;
  } else if (id == "TRAIN") {
    s.days = 7;
    s.cc_error = {CcModel::kTrainNormal};
    s.announce_delay = false;
  } else {
    throw std::invalid_argument("unknown scenario id: " + id);
  }
  return s;
}

std::vector<std::string> standard_scenario_ids() {
  return {"S0", "S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9"};
}

namespace {

constexpr double kMinPerDay = 1440.0;
constexpr double kEatingDuration = 15.0;  // min over which a meal is ingested
constexpr double kRescueTau = 10.0;  // min, fast-acting rescue carb absorption

struct MealWindow {
  MealSlot slot;
  double start_min;  // minutes into the day
  double end_min;
  double lo_g;
  double hi_g;
};

const MealWindow kWindows[3] = {
    {MealSlot::kBreakfast, 7 * 60.0, 8 * 60.0 + 30.0, 15.0, 50.0},
    {MealSlot::kLunch, 12 * 60.0, 13 * 60.0 + 30.0, 50.0, 90.0},
    {MealSlot::kDinner, 19 * 60.0, 20 * 60.0 + 30.0, 30.0, 70.0},
};

double cc_factor(CcModel model, Rng& rng) {
  switch (model) {
    case CcModel::kNone:
      return 1.0;
    case CcModel::kRandomOver:
      return rng.uniform(1.0, 1.25);
    case CcModel::kRandomUnder:
      return rng.uniform(0.75, 1.0);
    case CcModel::kRandomSym:
      return rng.uniform(0.75, 1.25);
    case CcModel::kSystematicOver:
      return 1.25;
    case CcModel::kSystematicUnder:
      return 0.75;
    case CcModel::kTrainNormal:
      return 1.0 + rng.trunc_normal(0.0, 0.25, -0.5, 0.5);
  }
  return 1.0;
}

}  // namespace

std::vector<VirtualSubject> generate_cohort(int n, std::uint64_t seed,
                                            const CohortConfig& cfg) {
  if (n < 1) throw std::invalid_argument("cohort size must be >= 1");
  if (!(cfg.basal_share > 0.0 && cfg.basal_share <= 1.0)) {
    throw std::invalid_argument("basal share must lie in (0, 1]");
  }
  const double sigma =
      cfg.cv > 0.0 ? std::sqrt(std::log(1.0 + cfg.cv * cfg.cv)) : 0.0;

  std::vector<VirtualSubject> cohort;
  cohort.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, 0x11, static_cast<std::uint64_t>(i)));
    bool built = false;
    for (int attempt = 0; attempt < cfg.max_redraws && !built; ++attempt) {
      PatientParameters plant;  // starts from population values
      auto draw = [&](double nominal) {
        return nominal * std::exp(sigma * rng.normal());
      };
      plant.k12 = draw(plant.k12);
      plant.EGP0_per_kg = draw(plant.EGP0_per_kg);
      plant.SI1 = draw(plant.SI1);
      plant.SI2 = draw(plant.SI2);
      plant.SI3 = draw(plant.SI3);
      plant.tau_S = draw(plant.tau_S);
      plant.tau_D = draw(plant.tau_D);
      plant.k_e = draw(plant.k_e);
      plant.V_G_per_kg = draw(plant.V_G_per_kg);
      plant.BW = rng.uniform(cfg.bw_lo, cfg.bw_hi);
      plant.validate();

      SteadyState ss;
      try {
        ss = find_steady_state(120.0, plant);
      } catch (const std::exception&) {
        continue;  // redraw
      }

      VirtualSubject subj;
      subj.index = i;
      subj.plant_params = plant;
      subj.controller_params = PatientParameters{};  // population model
      subj.controller_params.BW = plant.BW;
      subj.seed = derive_seed(seed, 0x22, static_cast<std::uint64_t>(i));

      TherapyProfile prof;
      prof.u_basal = ss.u_ss * 60.0 / 1000.0;  // mU/min -> U/h
      prof.TDI_basal = 24.0 * prof.u_basal;
      const double tdi_est = prof.TDI_basal / cfg.basal_share;
      prof.CR = 500.0 / tdi_est;
      prof.CF = 1800.0 / tdi_est;
      prof.DIA = 240.0;
      subj.profile = prof;

      cohort.push_back(subj);
      built = true;
    }
    if (!built) {
      throw std::runtime_error(
          "could not draw a feasible subject within the retry budget");
    }
  }
  return cohort;
}

std::vector<MealEvent> generate_meals(const ScenarioSpec& spec,
                                      std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<MealEvent> meals;
  meals.reserve(spec.days * 3);
  for (int day = 0; day < spec.days; ++day) {
    const CcModel cc = spec.cc_for_day(day);
    for (const MealWindow& w : kWindows) {
      MealEvent m;
      m.slot = w.slot;
      const double t_in_day = rng.uniform(w.start_min, w.end_min);
      m.t_true = day * kMinPerDay + std::floor(t_in_day);
      const double mid = 0.5 * (w.lo_g + w.hi_g);
      const double sd = (w.hi_g - w.lo_g) / 4.0;
      m.grams_true = rng.trunc_normal(mid, sd, w.lo_g, w.hi_g);
      const double delay =
          spec.announce_delay ? rng.uniform(spec.delay_lo, spec.delay_hi) : 0.0;
      m.t_announced = m.t_true + delay;
      m.grams_announced = m.grams_true * cc_factor(cc, rng);
      meals.push_back(m);
    }
  }
  return meals;
}

double CgmSensor::sense(double plant_bg) {
  if (!std::isfinite(plant_bg)) {
    throw std::invalid_argument("plant glucose must be finite");
  }
  double e = 0.0;
  if (cfg_.sd > 0.0) {
    e = cfg_.ar1 * e_prev_ + rng_.normal(0.0, cfg_.sd);
    e_prev_ = e;
  }
  return std::min(cfg_.clamp_hi, std::max(cfg_.clamp_lo, plant_bg + e));
}

namespace {

/// Plant state: the physiological core plus a fast-absorbing carbohydrate
/// pair for rescue carbs.
struct PlantState {
  ModelState core;
  double R1 = 0.0;
  double R2 = 0.0;
};

Eigen::Matrix<double, 12, 1> plant_vec(const PlantState& s) {
  Eigen::Matrix<double, 12, 1> v;
  v.head<10>() = s.core.as_vector();
  v(10) = s.R1;
  v(11) = s.R2;
  return v;
}

PlantState plant_from_vec(const Eigen::Matrix<double, 12, 1>& v) {
  PlantState s;
  s.core = ModelState::from_vector(v.head<10>());
  s.R1 = v(10);
  s.R2 = v(11);
  return s;
}

Eigen::Matrix<double, 12, 1> plant_derivs(const PlantState& s, double u,
                                          double d_meal,
                                          const PatientParameters& p) {
  ModelInput in;
  in.u = u;
  in.d = d_meal;
  ModelState dcore = derivatives(s.core, in, p);
  const double tau_r = kRescueTau;
  dcore.Q1 += s.R2 / tau_r;
  Eigen::Matrix<double, 12, 1> d;
  d.head<10>() = dcore.as_vector();
  d(10) = -s.R1 / tau_r;
  d(11) = (s.R1 - s.R2) / tau_r;
  return d;
}

PlantState plant_rk4(const PlantState& s, double u, double d_meal,
                     const PatientParameters& p, double dt, long* clamps) {
  const auto x0 = plant_vec(s);
  const auto k1 = plant_derivs(s, u, d_meal, p);
  const auto k2 =
      plant_derivs(plant_from_vec(x0 + 0.5 * dt * k1), u, d_meal, p);
  const auto k3 =
      plant_derivs(plant_from_vec(x0 + 0.5 * dt * k2), u, d_meal, p);
  const auto k4 = plant_derivs(plant_from_vec(x0 + dt * k3), u, d_meal, p);
  Eigen::Matrix<double, 12, 1> next =
      x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  for (int i = 0; i < 12; ++i) {
    if (next(i) < 0.0) {
      next(i) = 0.0;
      if (clamps) ++(*clamps);
    }
  }
  if (!next.allFinite()) {
    throw std::runtime_error("plant integration produced a non-finite state");
  }
  return plant_from_vec(next);
}

}  // namespace

SimulationTrace run_scenario(const ScenarioSpec& spec,
                             const VirtualSubject& subject,
                             const RunModuleConfigs& cfgs,
                             std::uint64_t seed) {
  spec.validate();
  const PatientParameters& plant_p = subject.plant_params;
  const PatientParameters& ctrl_p = subject.controller_params;

  std::vector<MealEvent> meals =
      generate_meals(spec, derive_seed(seed, 0x51));
  CgmSensor sensor(cfgs.noise, derive_seed(seed, 0x52));

  const double Ts = cfgs.controller.mpc.Ts;
  const int steps_per_day = static_cast<int>(kMinPerDay / Ts);
  const int n_steps = spec.days * steps_per_day;

  // announcement step index (first step at or after the announcement time)
  std::vector<std::vector<MealAnnouncement>> due(n_steps);
  for (const MealEvent& m : meals) {
    const int k = static_cast<int>(std::ceil(m.t_announced / Ts - 1e-9));
    if (k >= 0 && k < n_steps) {
      due[k].push_back({k * Ts, m.grams_announced});
    }
  }

  const double g0 = spec.initial_glucose > 0.0 ? spec.initial_glucose : 120.0;
  PlantState plant;
  plant.core = find_steady_state(g0, plant_p).x;

  SimulationTrace trace;
  trace.scenario_id = spec.id;
  trace.subject_index = subject.index;
  trace.seed = seed;
  trace.days = spec.days;
  trace.bw = plant_p.BW;
  trace.rows.reserve(n_steps);

  auto biased_profile = [&](int day) {
    TherapyProfile prof = subject.profile;
    const double bias = spec.bias_for_day(day);
    prof.u_basal *= bias;
    prof.TDI_basal = 24.0 * prof.u_basal;
    return prof;
  };

  const double bg0 = glucose_of(plant.core, plant_p);
  const double cgm0 = sensor.sense(bg0);

  const ModelState ctrl_eq = find_steady_state(120.0, ctrl_p).x;
  const EkfConfig ekf_cfg = default_ekf_config(ctrl_eq, cfgs.ekf_sensor_sd);

  ClosedLoopController controller(ctrl_p, biased_profile(0), cfgs.controller,
                                  ekf_cfg, cgm0, 0.0);

  double last_rescue_t = -1e18;
  double pending_cgm = cgm0;
  double pending_bg = bg0;
  std::size_t next_meal = 0;
  std::vector<std::pair<double, double>> eating;  // (end time, g/min rate)
  std::sort(meals.begin(), meals.end(),
            [](const MealEvent& a, const MealEvent& b) {
              return a.t_true < b.t_true;
            });
  std::vector<MealEvent> fired_rescues;

  int current_day = 0;
  for (int k = 0; k < n_steps; ++k) {
    const double t = k * Ts;
    const int day = k / steps_per_day;
    if (day != current_day) {
      current_day = day;
      controller.set_profile(biased_profile(day));
    }

    const double bg = (k == 0) ? pending_bg : glucose_of(plant.core, plant_p);
    const double cgm = (k == 0) ? pending_cgm : sensor.sense(bg);

    const auto res = controller.step(t, cgm, due[k]);

    TraceRow row;
    row.t = t;
    row.plant_bg = bg;
    row.cgm = cgm;
    row.roc = res.mpc.roc;
    row.iob = res.mpc.iob;
    row.bound_lo = res.mpc.bounds.lo;
    row.bound_hi = res.mpc.bounds.hi;
    row.basal_uh = res.basal_rate;
    row.prandial_u = res.prandial_u;
    row.correction_u = res.correction_u;
    row.meal_announced_g = res.announced_grams;
    row.qp_iterations = res.mpc.qp_iterations;
    row.degraded = res.mpc.degraded ? 1 : 0;
    row.ekf_rejected = res.ekf_rejected ? 1 : 0;
    if (res.mpc.degraded) ++trace.degraded_steps;

    if (spec.rescue_rule && bg < spec.rescue_threshold &&
        t - last_rescue_t >= spec.rescue_spacing) {
      last_rescue_t = t;
      plant.R1 += 1000.0 * plant_p.AG * spec.rescue_grams / plant_p.M_wg;
      row.rescue_g = spec.rescue_grams;
      MealEvent rescue;
      rescue.slot = MealSlot::kRescue;
      rescue.t_true = t;
      rescue.grams_true = spec.rescue_grams;
      rescue.t_announced = t;
      rescue.grams_announced = 0.0;
      fired_rescues.push_back(rescue);
    }

    // plant advance over [t, t+Ts) in 1-min substeps; each meal is eaten at
    // a constant rate over kEatingDuration starting at its true time
    const double u_plant = res.basal_rate * kMuPerMinPerUh +
                           (res.prandial_u + res.correction_u) * 1000.0 / Ts;
    double sub_t = t;
    const double t_end = t + Ts;
    while (sub_t < t_end - 1e-9) {
      while (next_meal < meals.size() &&
             meals[next_meal].t_true <= sub_t + 1e-9) {
        eating.push_back({meals[next_meal].t_true + kEatingDuration,
                          meals[next_meal].grams_true / kEatingDuration});
        ++next_meal;
      }
      double d_rate = 0.0;
      for (const auto& e : eating) {
        if (e.first > sub_t + 1e-9) d_rate += e.second;
      }
      eating.erase(std::remove_if(eating.begin(), eating.end(),
                                  [&](const std::pair<double, double>& e) {
                                    return e.first <= sub_t + 1e-9;
                                  }),
                   eating.end());
      const double dt = std::min(1.0, t_end - sub_t);
      row.meal_true_g += d_rate * dt;
      plant = plant_rk4(plant, u_plant, d_rate, plant_p, dt,
                        &trace.clamp_events);
      sub_t += dt;
    }

    trace.rows.push_back(row);
  }

  trace.dosing = controller.dosing_history();
  trace.ekf_rejections = controller.ekf_rejections();
  trace.meals = meals;
  trace.meals.insert(trace.meals.end(), fired_rescues.begin(),
                     fired_rescues.end());
  std::sort(trace.meals.begin(), trace.meals.end(),
            [](const MealEvent& a, const MealEvent& b) {
              return a.t_true < b.t_true ||
                     (a.t_true == b.t_true && a.slot < b.slot);
            });
  return trace;
}

}  // namespace haid
