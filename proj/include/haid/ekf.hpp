#pragma once

#include "haid/hovorka.hpp"

namespace haid {

struct EkfConfig {
  StateVec Q_proc = StateVec::Constant(1e-8);  // per-minute noise intensity (diagonal)
  double R_meas = 4.0;                         // (mg/dL)^2
  StateVec P0 = StateVec::Constant(1e-4);      // initial covariance diagonal
  double gate_sigmas = 10.0;   // innovation gate in units of sqrt(S)
  double trace_ceiling = 1e12;
  double substep = 1.0;        // min, internal integration step
};

/// Scale-aware defaults built from a subject's equilibrium state: process
/// noise lets each state wander 5% of its equilibrium magnitude per hour,
/// initial uncertainty is 20% of the equilibrium magnitude.
EkfConfig default_ekf_config(const ModelState& x_eq, double sensor_sd_mgdl);

struct EkfState {
  ModelState x_hat;
  StateMat P;
  double t = 0.0;  // min
};

EkfState make_ekf_state(const ModelState& x0, const EkfConfig& cfg, double t0);

struct EkfUpdateInfo {
  double innovation = 0.0;     // mg/dL
  double innovation_var = 0.0; // (mg/dL)^2
  bool rejected = false;
};

/// Propagates the estimate with the nonlinear model and the covariance with
/// the discrete transition matrix: P <- F P F' + Q_proc * dt. Throws on
/// covariance blow-up past cfg.trace_ceiling.
EkfState ekf_predict(const EkfState& s, const ModelInput& inp,
                     const PatientParameters& p, const EkfConfig& cfg,
                     double dt);

/// Scalar CGM update, Joseph-form covariance. An innovation beyond
/// gate_sigmas * sqrt(S) is rejected (state unchanged, info flagged).
EkfState ekf_update(const EkfState& s, double y_cgm,
                    const PatientParameters& p, const EkfConfig& cfg,
                    EkfUpdateInfo* info = nullptr);

}  // namespace haid
