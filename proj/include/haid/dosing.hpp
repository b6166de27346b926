#pragma once

#include <vector>

namespace haid {

/// Per-subject therapy settings as the controller believes them (scenario
/// basal bias acts here, never on the plant).
struct TherapyProfile {
  double u_basal = 1.0;     // U/h
  double TDI_basal = 24.0;  // U/day, 24 * nominal u_basal
  double CR = 10.0;         // g CHO per U
  double CF = 40.0;         // mg/dL drop per U
  double DIA = 240.0;       // min
};

enum class DoseKind { kBasalStep, kPrandialBolus, kCorrectionBolus };

struct DosingRecord {
  double t = 0.0;      // min
  double amount = 0.0; // U
  DoseKind kind = DoseKind::kBasalStep;
};

struct CgmSample {
  double t = 0.0;   // min
  double value = 0.0;  // mg/dL
};

/// Linearly decaying insulin on board over the duration of insulin action:
/// boluses count in full, basal steps count only their excess over the
/// profile's nominal rate.
double compute_iob(const std::vector<DosingRecord>& history, double t_now,
                   const TherapyProfile& profile, double Ts = 5.0);

struct RocResult {
  double slope = 0.0;  // mg/dL/min
  bool cold_start = false;
};

/// Least-squares slope over the most recent samples within a 15-min window
/// (at most 3 at 5-min sampling). Fewer than 2 samples flags a cold start.
RocResult compute_roc(const std::vector<CgmSample>& cgm_history, double t_now);

}  // namespace haid
