#pragma once

#include <limits>
#include <vector>

#include "haid/dosing.hpp"
#include "haid/ekf.hpp"
#include "haid/hovorka.hpp"
#include "haid/qp.hpp"

namespace haid {

struct MpcConfig {
  int Np = 12;
  int Nc = 12;
  double r = 120.0;          // mg/dL target
  double Q_weight = 1e-6;
  double R_weight = 1e-6;
  double N_tdi_min = 1.5;
  double N_tdi_max = 3.0;
  double N_roc_high = 0.7;   // mg/dL/min
  double delta_u_min = -std::numeric_limits<double>::infinity();  // U/h per step
  double delta_u_max = std::numeric_limits<double>::infinity();
  double Ts = 5.0;           // min
  double low_glucose_floor = 40.0;  // mg/dL

  void validate() const;  // throws std::invalid_argument
};

struct RateBounds {
  double lo = 0.0;  // U/h
  double hi = 0.0;
};

/// Insulin-rate interval for every step of the horizon. Stage 1 picks the
/// TDI-scaled interval by the insulin-on-board level; stage 2 tightens it
/// from the CGM level and rate of change, suspension [0,0] dominating.
RateBounds adaptive_bounds(double y_cgm, double roc, double iob,
                           const TherapyProfile& profile,
                           const MpcConfig& cfg);

/// Condensed QP over the absolute rate sequence U (U/h): predictions are
/// affine in U through the stacked powers of the linearized model, the cost
/// penalizes tracking error and move increments with Q/u_basal^2 and
/// R/u_basal^2 weights.
QpProblem build_qp(const LinearizedModel& model, double u_prev,
                   const RateBounds& bounds, const MpcConfig& cfg,
                   const TherapyProfile& profile);

struct MpcDecision {
  double rate = 0.0;        // U/h commanded for the next Ts
  RateBounds bounds;
  double roc = 0.0;
  double iob = 0.0;
  int qp_iterations = 0;
  bool degraded = false;    // solver cap hit; fallback rate in `rate`
  double kkt_residual = 0.0;
};

/// One receding-horizon step: linearize at the current estimate, adapt the
/// bounds, build and solve the QP, return the first move.
MpcDecision mpc_step(const EkfState& ekf,
                     const std::vector<CgmSample>& cgm_history,
                     const std::vector<DosingRecord>& dosing_history,
                     double u_prev, const TherapyProfile& profile,
                     const MpcConfig& cfg, const PatientParameters& p);

}  // namespace haid
