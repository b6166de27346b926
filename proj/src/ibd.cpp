#include "haid/ibd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace haid {

TrendArrow classify_arrow(double roc) {
  if (!std::isfinite(roc)) {
    throw std::invalid_argument("rate of change must be finite");
  }
  TrendArrow arrow;
  arrow.roc = roc;
  const double mag = std::abs(roc);
  if (mag >= 3.0) {
    arrow.category = roc > 0 ? ArrowCategory::kDoubleUp : ArrowCategory::kDoubleDown;
  } else if (mag >= 2.0) {
    arrow.category = roc > 0 ? ArrowCategory::kSingleUp : ArrowCategory::kSingleDown;
  } else if (mag >= 1.0) {
    arrow.category = roc > 0 ? ArrowCategory::kDiagonalUp : ArrowCategory::kDiagonalDown;
  } else {
    arrow.category = ArrowCategory::kFlat;
  }
  return arrow;
}

namespace {

// +1 climbing, 0 flat, -1 falling
int arrow_sign(ArrowCategory c) {
  switch (c) {
    case ArrowCategory::kDoubleUp:
    case ArrowCategory::kSingleUp:
    case ArrowCategory::kDiagonalUp:
      return 1;
    case ArrowCategory::kFlat:
      return 0;
    case ArrowCategory::kDiagonalDown:
    case ArrowCategory::kSingleDown:
    case ArrowCategory::kDoubleDown:
      return -1;
  }
  return 0;
}

// shift magnitude for the adjusted-glucose lookup
double arrow_shift(ArrowCategory c) {
  switch (c) {
    case ArrowCategory::kDoubleUp:
    case ArrowCategory::kDoubleDown:
      return 100.0;
    case ArrowCategory::kSingleUp:
    case ArrowCategory::kSingleDown:
      return 75.0;
    case ArrowCategory::kDiagonalUp:
    case ArrowCategory::kDiagonalDown:
      return 50.0;
    case ArrowCategory::kFlat:
      return 0.0;
  }
  return 0.0;
}

int cf_band(double CF) {
  if (CF < 25.0) return 0;
  if (CF < 50.0) return 1;
  if (CF < 75.0) return 2;
  return 3;
}

}  // namespace

double adjusted_glucose(double G_cur, const TrendArrow& arrow) {
  const double shifted =
      G_cur + arrow_sign(arrow.category) * arrow_shift(arrow.category);
  return std::min(600.0, std::max(40.0, shifted));
}

double roc_cf_adjustment(const TrendArrow& arrow, double CF) {
  if (CF <= 0.0) {
    throw std::invalid_argument("correction factor must be positive");
  }
  static const double kTable[3][4] = {
      {4.5, 3.0, 1.5, 1.0},    // double arrows
      {3.0, 2.0, 1.0, 0.5},    // single arrows
      {1.5, 1.0, 0.5, 0.25},   // diagonal arrows
  };
  const int sign = arrow_sign(arrow.category);
  if (sign == 0) return 0.0;
  int row;
  switch (arrow.category) {
    case ArrowCategory::kDoubleUp:
    case ArrowCategory::kDoubleDown:
      row = 0;
      break;
    case ArrowCategory::kSingleUp:
    case ArrowCategory::kSingleDown:
      row = 1;
      break;
    default:
      row = 2;
      break;
  }
  return sign * kTable[row][cf_band(CF)];
}

BolusResult prandial_bolus(const BolusRequest& req) {
  if (req.CHO_announced < 0.0) {
    throw std::invalid_argument("announced carbohydrates cannot be negative");
  }
  if (!(req.G_cur >= 20.0 && req.G_cur <= 600.0)) {
    throw std::invalid_argument("glucose input outside plausible range");
  }
  const double G_adj = adjusted_glucose(req.G_cur, req.arrow);
  const double raw = req.CHO_announced / req.profile.CR +
                     roc_cf_adjustment(req.arrow, req.profile.CF) +
                     (G_adj - req.G_tar) / req.profile.CF - req.iob;
  BolusResult out;
  out.raw = raw;
  out.amount = std::max(0.0, raw);
  return out;
}

double correction_alpha(const TrendArrow& arrow) {
  switch (arrow.category) {
    case ArrowCategory::kDoubleUp:
      return 1.5;
    case ArrowCategory::kSingleUp:
      return 1.4;
    case ArrowCategory::kDiagonalUp:
      return 1.3;
    default:
      return 1.0;
  }
}

std::optional<BolusResult> correction_bolus(double t, double G_cur,
                                            const TrendArrow& arrow,
                                            const TherapyProfile& profile,
                                            double iob, double G_tar,
                                            const CorrectionGate& gate,
                                            GateState& state) {
  if (!(G_cur > gate.bg_threshold)) return std::nullopt;
  if (t - state.last_meal_announce_t < gate.min_since_meal) return std::nullopt;
  if (t - state.last_correction_t < gate.min_since_correction) return std::nullopt;

  const double G_adj = adjusted_glucose(G_cur, arrow);
  const double raw =
      correction_alpha(arrow) * ((G_adj - G_tar) / profile.CF - iob);
  BolusResult out;
  out.raw = raw;
  out.amount = std::max(0.0, raw);
  if (out.amount > 0.0) {
    state.last_correction_t = t;
  }
  return out;
}

}  // namespace haid
