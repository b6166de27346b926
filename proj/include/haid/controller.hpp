#pragma once

#include <vector>

#include "haid/dosing.hpp"
#include "haid/ekf.hpp"
#include "haid/hovorka.hpp"
#include "haid/ibd.hpp"
#include "haid/mpc.hpp"

namespace haid {

struct ControllerConfig {
  MpcConfig mpc;
  CorrectionGate gate;
  double bolus_target = 120.0;  // mg/dL, G_tar of the bolus formulas
};

/// A meal announcement as the controller hears it: when it was announced and
/// the carbohydrate estimate the user gave. Nothing about ground truth.
struct MealAnnouncement {
  double t = 0.0;      // min
  double grams = 0.0;  // g, as announced
};

/// Per-subject hybrid closed loop: EKF state estimation, adaptive-bound MPC
/// basal, announcement-driven prandial boluses, gated corrections. Sees only
/// CGM samples, announcements, and its own dosing history.
class ClosedLoopController {
 public:
  ClosedLoopController(const PatientParameters& model_params,
                       const TherapyProfile& profile,
                       const ControllerConfig& cfg, const EkfConfig& ekf_cfg,
                       double cgm0, double t0);

  struct StepResult {
    double basal_rate = 0.0;       // U/h for the coming interval
    double prandial_u = 0.0;       // U delivered this step
    double correction_u = 0.0;     // U delivered this step
    double announced_grams = 0.0;  // g processed this step
    MpcDecision mpc;
    bool ekf_rejected = false;
  };

  /// Advance one control interval: predict to t, absorb the CGM sample,
  /// handle due announcements, consider a correction, command the basal.
  StepResult step(double t, double cgm,
                  const std::vector<MealAnnouncement>& due);

  /// Scenario basal bias changes the believed profile at day boundaries.
  void set_profile(const TherapyProfile& profile) { profile_ = profile; }
  const TherapyProfile& profile() const { return profile_; }

  const std::vector<DosingRecord>& dosing_history() const { return dosing_; }
  const EkfState& estimate() const { return ekf_; }
  int ekf_rejections() const { return ekf_rejections_; }

 private:
  PatientParameters model_;
  TherapyProfile profile_;
  ControllerConfig cfg_;
  EkfConfig ekf_cfg_;
  EkfState ekf_;
  GateState gate_state_;
  std::vector<CgmSample> cgm_history_;
  std::vector<DosingRecord> dosing_;
  double u_prev_ = 0.0;            // U/h, last commanded basal
  double applied_mU_min_ = 0.0;    // insulin rate over the previous interval
  int ekf_rejections_ = 0;
};

}  // namespace haid
