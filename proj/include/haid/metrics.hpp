#pragma once

#include <vector>

#include "haid/scenario.hpp"

namespace haid {

struct RangeShares {
  double TIR = 0.0;        // % in [70, 180]
  double TITR = 0.0;       // % in [70, 140]
  double TAR = 0.0;        // % > 180
  double TAR_gt250 = 0.0;  // % > 250
  double TBR = 0.0;        // % < 70
  double TBR_lt54 = 0.0;   // % < 54
};

RangeShares ranges(const std::vector<double>& bg);  // throws on empty input

struct Variability {
  double mean_bg = 0.0;  // mg/dL
  double CV = 0.0;       // %
  double HBGI = 0.0;
  double LBGI = 0.0;
};

/// CV with n-1 normalization; HBGI/LBGI through the symmetrized log-glucose
/// risk transform, one-sided risks averaged over all samples.
Variability variability_and_risk(const std::vector<double>& bg);

double risk_f(double bg);  // the symmetrizing transform, sign carries side

struct EventCounts {
  int hypo = 0;
  int hyper = 0;
};

/// Dwell-based excursion counting: an event opens after 15 consecutive
/// minutes beyond the threshold and closes after 15 consecutive minutes back
/// in range.
EventCounts events(const std::vector<double>& bg, double step_min = 5.0);

struct InsulinPartition {
  double TDI = 0.0;         // U/day
  double TDI_per_kg = 0.0;  // U/kg/day
  double basal_pct = 0.0;
  double bolus_pct = 0.0;
  double prandial_pct = 0.0;
  double correction_pct = 0.0;
};

InsulinPartition insulin_partition(const std::vector<DosingRecord>& dosing,
                                   double days, double bw);

struct GlycemicReport {
  RangeShares range;
  Variability var;
  EventCounts event;
  InsulinPartition insulin;
  double hypo_per_day = 0.0;
  double hyper_per_day = 0.0;
};

/// Metrics on plant glucose (set use_cgm for the sensor-side variant).
GlycemicReport compute_report(const SimulationTrace& trace,
                              bool use_cgm = false);

}  // namespace haid
