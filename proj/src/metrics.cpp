#include "haid/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace haid {

RangeShares ranges(const std::vector<double>& bg) {
  if (bg.empty()) {
    throw std::invalid_argument("range metrics need a non-empty trace");
  }
  RangeShares out;
  const double n = static_cast<double>(bg.size());
  for (double v : bg) {
    if (v >= 70.0 && v <= 180.0) out.TIR += 1.0;
    if (v >= 70.0 && v <= 140.0) out.TITR += 1.0;
    if (v > 180.0) out.TAR += 1.0;
    if (v > 250.0) out.TAR_gt250 += 1.0;
    if (v < 70.0) out.TBR += 1.0;
    if (v < 54.0) out.TBR_lt54 += 1.0;
  }
  out.TIR *= 100.0 / n;
  out.TITR *= 100.0 / n;
  out.TAR *= 100.0 / n;
  out.TAR_gt250 *= 100.0 / n;
  out.TBR *= 100.0 / n;
  out.TBR_lt54 *= 100.0 / n;
  return out;
}

double risk_f(double bg) {
  return 1.509 * (std::pow(std::log(bg), 1.084) - 5.381);
}

Variability variability_and_risk(const std::vector<double>& bg) {
  if (bg.size() < 2) {
    throw std::invalid_argument("variability metrics need >= 2 samples");
  }
  Variability out;
  const double n = static_cast<double>(bg.size());
  double sum = 0.0;
  for (double v : bg) sum += v;
  out.mean_bg = sum / n;

  double ss = 0.0;
  for (double v : bg) {
    const double d = v - out.mean_bg;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  out.CV = out.mean_bg > 0.0 ? 100.0 * sd / out.mean_bg : 0.0;

  double lo_acc = 0.0, hi_acc = 0.0;
  for (double v : bg) {
    const double f = risk_f(v);
    const double r = 10.0 * f * f;
    if (f < 0.0) lo_acc += r;
    if (f > 0.0) hi_acc += r;
  }
  out.LBGI = lo_acc / n;
  out.HBGI = hi_acc / n;
  return out;
}

namespace {

int count_events(const std::vector<double>& bg, double step_min, bool hypo) {
  const int dwell = std::max(1, static_cast<int>(std::ceil(15.0 / step_min)));
  int events = 0;
  int out_streak = 0;
  int in_streak = 0;
  bool open = false;
  for (double v : bg) {
    const bool beyond = hypo ? (v < 70.0) : (v > 180.0);
    if (!open) {
      out_streak = beyond ? out_streak + 1 : 0;
      if (out_streak >= dwell) {
        open = true;
        ++events;
        in_streak = 0;
      }
    } else {
      in_streak = beyond ? 0 : in_streak + 1;
      if (in_streak >= dwell) {
        open = false;
        out_streak = 0;
      }
    }
  }
  return events;
}

}  // namespace

EventCounts events(const std::vector<double>& bg, double step_min) {
  if (step_min <= 0.0) {
    throw std::invalid_argument("sampling step must be positive");
  }
  EventCounts out;
  out.hypo = count_events(bg, step_min, true);
  out.hyper = count_events(bg, step_min, false);
  return out;
}

InsulinPartition insulin_partition(const std::vector<DosingRecord>& dosing,
                                   double days, double bw) {
  if (days <= 0.0 || bw <= 0.0) {
    throw std::invalid_argument("partition needs positive duration and weight");
  }
  double basal = 0.0, prandial = 0.0, correction = 0.0;
  for (const DosingRecord& rec : dosing) {
    switch (rec.kind) {
      case DoseKind::kBasalStep:
        basal += rec.amount;
        break;
      case DoseKind::kPrandialBolus:
        prandial += rec.amount;
        break;
      case DoseKind::kCorrectionBolus:
        correction += rec.amount;
        break;
    }
  }
  const double total = basal + prandial + correction;
  InsulinPartition out;
  out.TDI = total / days;
  out.TDI_per_kg = out.TDI / bw;
  if (total > 0.0) {
    out.basal_pct = 100.0 * basal / total;
    out.prandial_pct = 100.0 * prandial / total;
    out.correction_pct = 100.0 * correction / total;
    out.bolus_pct = out.prandial_pct + out.correction_pct;
  } else {
    out.basal_pct = 100.0;
  }
  return out;
}

GlycemicReport compute_report(const SimulationTrace& trace, bool use_cgm) {
  std::vector<double> bg;
  bg.reserve(trace.rows.size());
  for (const TraceRow& row : trace.rows) {
    bg.push_back(use_cgm ? row.cgm : row.plant_bg);
  }
  GlycemicReport rep;
  rep.range = ranges(bg);
  rep.var = variability_and_risk(bg);
  rep.event = events(bg);
  rep.insulin = insulin_partition(trace.dosing,
                                  static_cast<double>(trace.days), trace.bw);
  rep.hypo_per_day = rep.event.hypo / static_cast<double>(trace.days);
  rep.hyper_per_day = rep.event.hyper / static_cast<double>(trace.days);
  return rep;
}

}  // namespace haid
