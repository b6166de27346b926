#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haid/controller.hpp"
#include "haid/hovorka.hpp"
#include "haid/rng.hpp"

namespace haid {

/// Per-meal carbohydrate-counting error models.
enum class CcModel {
  kNone,             // announced = true
  kRandomOver,       // factor ~ U[1, 1.25]
  kRandomUnder,      // factor ~ U[0.75, 1]
  kRandomSym,        // factor ~ U[0.75, 1.25]
  kSystematicOver,   // factor 1.25
  kSystematicUnder,  // factor 0.75
  kTrainNormal,      // factor 1 + N(0, 0.25) truncated to +/-0.5
};

struct ScenarioSpec {
  std::string id;
  int days = 5;
  std::vector<double> basal_bias;  // per-day multiplier on the believed basal
  std::vector<CcModel> cc_error;   // per-day model
  bool announce_delay = false;     // uniform [delay_lo, delay_hi] min
  double delay_lo = 0.0;
  double delay_hi = 30.0;
  double initial_glucose = 0.0;    // mg/dL; <= 0 means equilibrium at 120
  bool rescue_rule = true;
  double rescue_grams = 15.0;
  double rescue_spacing = 15.0;    // min
  double rescue_threshold = 70.0;  // mg/dL

  double bias_for_day(int day) const;
  CcModel cc_for_day(int day) const;
  void validate() const;  // throws std::invalid_argument
};

/// The stress-test battery: S0 (5-day benchmark, no announcement delay),
/// S1/S2 (basal belief +/-25%), S3/S4 (random carb over/under-counting),
/// S5 (alternating basal bias), S6 (day-patterned carb errors), S7 (S5+S6),
/// S8/S9 (1-day starts at 60 / 250 mg/dL), TRAIN (7 days, noisy counting,
/// no delay) for model fitting.
ScenarioSpec standard_scenario(const std::string& id);
std::vector<std::string> standard_scenario_ids();  // S0..S9

enum class MealSlot { kBreakfast, kLunch, kDinner, kRescue };

struct MealEvent {
  double t_true = 0.0;       // min
  double grams_true = 0.0;   // g
  double t_announced = 0.0;  // min (>= t_true)
  double grams_announced = 0.0;  // g; rescues are never announced
  MealSlot slot = MealSlot::kBreakfast;
};

struct VirtualSubject {
  int index = 0;
  PatientParameters plant_params;       // ground truth
  PatientParameters controller_params;  // population, personalized after fit
  TherapyProfile profile;
  std::uint64_t seed = 0;
};

struct CohortConfig {
  double cv = 0.15;           // lognormal coefficient of variation
  double bw_lo = 55.0;        // kg
  double bw_hi = 95.0;
  double basal_share = 0.30;  // assumed basal fraction of TDI for CR/CF rules
  int max_redraws = 100;
};

/// Deterministic virtual cohort: plant parameters lognormal around the
/// population values, body weight uniform, therapy profile titrated from the
/// subject's own equilibrium at 120 mg/dL.
std::vector<VirtualSubject> generate_cohort(int n, std::uint64_t seed,
                                            const CohortConfig& cfg);

std::vector<MealEvent> generate_meals(const ScenarioSpec& spec,
                                      std::uint64_t seed);

struct NoiseConfig {
  double sd = 0.0;     // mg/dL innovation SD; 0 disables noise
  double ar1 = 0.7;
  double clamp_lo = 40.0;
  double clamp_hi = 400.0;
};

/// AR(1)-correlated CGM error on top of plant glucose, clamped to the
/// sensor's reporting range.
class CgmSensor {
 public:
  CgmSensor(const NoiseConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed) {}
  double sense(double plant_bg);

 private:
  NoiseConfig cfg_;
  Rng rng_;
  double e_prev_ = 0.0;
};

struct TraceRow {
  double t = 0.0;
  double plant_bg = 0.0;
  double cgm = 0.0;
  double roc = 0.0;
  double iob = 0.0;
  double bound_lo = 0.0;
  double bound_hi = 0.0;
  double basal_uh = 0.0;
  double prandial_u = 0.0;
  double correction_u = 0.0;
  double meal_true_g = 0.0;      // grams reaching the plant this interval
  double meal_announced_g = 0.0; // grams announced this step
  double rescue_g = 0.0;
  int qp_iterations = 0;
  int degraded = 0;
  int ekf_rejected = 0;
};

struct SimulationTrace {
  std::string scenario_id;
  int subject_index = 0;
  std::uint64_t seed = 0;
  int days = 0;
  double bw = 0.0;
  std::vector<TraceRow> rows;
  std::vector<DosingRecord> dosing;
  std::vector<MealEvent> meals;  // generated meals plus fired rescues
  long clamp_events = 0;
  int degraded_steps = 0;
  int ekf_rejections = 0;
};

struct RunModuleConfigs {
  ControllerConfig controller;
  NoiseConfig noise;
  double ekf_sensor_sd = 0.0;  // informs the filter's measurement variance
};

/// Full closed-loop rollout of one subject through one scenario on the 5-min
/// grid. Deterministic in (spec, subject, configs, seed).
SimulationTrace run_scenario(const ScenarioSpec& spec,
                             const VirtualSubject& subject,
                             const RunModuleConfigs& cfgs, std::uint64_t seed);

}  // namespace haid
