#include "haid/controller.hpp"

#include <algorithm>
#include <cmath>

namespace haid {

namespace {

ModelState initial_estimate(const PatientParameters& p, double cgm0) {
  const double g = std::min(350.0, std::max(45.0, cgm0));
  try {
    return find_steady_state(g, p).x;
  } catch (const std::exception&) {
    return find_steady_state(120.0, p).x;
  }
}

}  // namespace

ClosedLoopController::ClosedLoopController(const PatientParameters& model_params,
                                           const TherapyProfile& profile,
                                           const ControllerConfig& cfg,
                                           const EkfConfig& ekf_cfg,
                                           double cgm0, double t0)
    : model_(model_params),
      profile_(profile),
      cfg_(cfg),
      ekf_cfg_(ekf_cfg),
      ekf_(make_ekf_state(initial_estimate(model_params, cgm0), ekf_cfg, t0)),
      u_prev_(profile.u_basal),
      applied_mU_min_(profile.u_basal * kMuPerMinPerUh) {}

ClosedLoopController::StepResult ClosedLoopController::step(
    double t, double cgm, const std::vector<MealAnnouncement>& due) {
  StepResult out;

  if (t > ekf_.t + 1e-9) {
    ModelInput inp;
    inp.u = applied_mU_min_;
    ekf_ = ekf_predict(ekf_, inp, model_, ekf_cfg_, t - ekf_.t);
  }
  EkfUpdateInfo info;
  ekf_ = ekf_update(ekf_, cgm, model_, ekf_cfg_, &info);
  out.ekf_rejected = info.rejected;
  if (info.rejected) ++ekf_rejections_;

  cgm_history_.push_back({t, cgm});

  const RocResult roc = compute_roc(cgm_history_, t);
  const TrendArrow arrow = classify_arrow(roc.slope);

  for (const MealAnnouncement& ann : due) {
    BolusRequest req;
    req.t = t;
    req.CHO_announced = ann.grams;
    req.G_cur = cgm;
    req.arrow = arrow;
    req.G_tar = cfg_.bolus_target;
    req.profile = profile_;
    req.iob = compute_iob(dosing_, t, profile_, cfg_.mpc.Ts);
    const BolusResult bolus = prandial_bolus(req);
    dosing_.push_back({t, bolus.amount, DoseKind::kPrandialBolus});
    out.prandial_u += bolus.amount;
    out.announced_grams += ann.grams;
    gate_state_.last_meal_announce_t = t;
    // the filter learns of the announced carbohydrates going forward
    ekf_.x_hat.D1 += 1000.0 * model_.AG * ann.grams / model_.M_wg;
  }

  {
    const double iob_now = compute_iob(dosing_, t, profile_, cfg_.mpc.Ts);
    const auto corr = correction_bolus(t, cgm, arrow, profile_, iob_now,
                                       cfg_.bolus_target, cfg_.gate,
                                       gate_state_);
    if (corr && corr->amount > 0.0) {
      dosing_.push_back({t, corr->amount, DoseKind::kCorrectionBolus});
      out.correction_u = corr->amount;
    }
  }

  out.mpc = mpc_step(ekf_, cgm_history_, dosing_, u_prev_, profile_, cfg_.mpc,
                     model_);
  out.basal_rate = out.mpc.rate;
  dosing_.push_back(
      {t, out.basal_rate * cfg_.mpc.Ts / 60.0, DoseKind::kBasalStep});

  u_prev_ = out.basal_rate;
  applied_mU_min_ = out.basal_rate * kMuPerMinPerUh +
                    (out.prandial_u + out.correction_u) * 1000.0 / cfg_.mpc.Ts;
  return out;
}

}  // namespace haid
