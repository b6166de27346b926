#pragma once

#include <optional>

#include "haid/dosing.hpp"

namespace haid {

enum class ArrowCategory {
  kDoubleUp,
  kSingleUp,
  kDiagonalUp,
  kFlat,
  kDiagonalDown,
  kSingleDown,
  kDoubleDown,
};

struct TrendArrow {
  ArrowCategory category = ArrowCategory::kFlat;
  double roc = 0.0;  // mg/dL/min
};

/// |roc| >= 3 double, [2,3) single, [1,2) diagonal, < 1 flat; sign sets the
/// direction.
TrendArrow classify_arrow(double roc);

/// Trend-shifted glucose: +/-100 double, +/-75 single, +/-50 diagonal, 0
/// flat; clamped to [40, 600] mg/dL.
double adjusted_glucose(double G_cur, const TrendArrow& arrow);

/// Signed bolus adjustment from the correction-factor band. CF bands are
/// closed on the left: < 25, [25, 50), [50, 75), >= 75.
double roc_cf_adjustment(const TrendArrow& arrow, double CF);

struct BolusRequest {
  double t = 0.0;           // min
  double CHO_announced = 0.0;  // g
  double G_cur = 120.0;     // mg/dL
  TrendArrow arrow;
  double G_tar = 120.0;     // mg/dL
  TherapyProfile profile;
  double iob = 0.0;         // U
};

struct BolusResult {
  double amount = 0.0;   // U delivered (floored at 0)
  double raw = 0.0;      // formula value before flooring
};

/// Meal bolus: CHO/CR + trend adjustment + (G_adj - G_tar)/CF - IoB,
/// floored at zero.
BolusResult prandial_bolus(const BolusRequest& req);

struct CorrectionGate {
  double bg_threshold = 180.0;       // mg/dL
  double min_since_meal = 180.0;     // min
  double min_since_correction = 30.0;  // min
};

struct GateState {
  double last_meal_announce_t = -1e18;   // min
  double last_correction_t = -1e18;      // min
};

/// Gain on the correction term by arrow: climbing trends boost it, flat and
/// falling trends leave it unscaled.
double correction_alpha(const TrendArrow& arrow);

/// Automatic correction when glucose is persistently high: fires only past
/// the BG threshold, far enough from the last announced meal and the last
/// correction. A positive dose refreshes the gate timestamp.
std::optional<BolusResult> correction_bolus(double t, double G_cur,
                                            const TrendArrow& arrow,
                                            const TherapyProfile& profile,
                                            double iob, double G_tar,
                                            const CorrectionGate& gate,
                                            GateState& state);

}  // namespace haid
