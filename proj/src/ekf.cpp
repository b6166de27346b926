#include "haid/ekf.hpp"

#include <cmath>
#include <stdexcept>

namespace haid {

namespace {

void symmetrize_and_floor(StateMat& P) {
  P = 0.5 * (P + P.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<StateMat> es(P);
  const StateVec ev = es.eigenvalues().cwiseMax(1e-12);
  P = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  P = 0.5 * (P + P.transpose()).eval();
}

void clamp_nonnegative(ModelState& x) {
  StateVec v = x.as_vector().cwiseMax(0.0);
  x = ModelState::from_vector(v);
}

}  // namespace

EkfConfig default_ekf_config(const ModelState& x_eq, double sensor_sd_mgdl) {
  EkfConfig cfg;
  const StateVec eq = x_eq.as_vector();
  for (int i = 0; i < kStateDim; ++i) {
    const double hourly_sd = 0.05 * eq(i);
    cfg.Q_proc(i) = std::max(1e-8, hourly_sd * hourly_sd / 60.0);
    const double init_sd = 0.2 * eq(i);
    cfg.P0(i) = std::max(1e-8, init_sd * init_sd);
  }
  const double sd = std::max(2.0, sensor_sd_mgdl);
  cfg.R_meas = sd * sd;
  return cfg;
}

EkfState make_ekf_state(const ModelState& x0, const EkfConfig& cfg, double t0) {
  EkfState s;
  s.x_hat = x0;
  s.P = cfg.P0.asDiagonal();
  s.t = t0;
  return s;
}

EkfState ekf_predict(const EkfState& s, const ModelInput& inp,
                     const PatientParameters& p, const EkfConfig& cfg,
                     double dt) {
  if (dt <= 0.0) {
    throw std::invalid_argument("prediction interval must be positive");
  }
  EkfState out = s;
  const LinearizedModel lm = linearize(s.x_hat, inp.u, p, dt);
  out.x_hat = integrate_interval(s.x_hat, inp, p, dt, cfg.substep);
  out.P = lm.A * s.P * lm.A.transpose();
  out.P += (dt * cfg.Q_proc).asDiagonal().toDenseMatrix();
  symmetrize_and_floor(out.P);
  out.t = s.t + dt;
  if (out.P.trace() > cfg.trace_ceiling) {
    throw std::runtime_error("state-estimate covariance diverged");
  }
  return out;
}

EkfState ekf_update(const EkfState& s, double y_cgm,
                    const PatientParameters& p, const EkfConfig& cfg,
                    EkfUpdateInfo* info) {
  if (!std::isfinite(y_cgm) || y_cgm < 20.0 || y_cgm > 600.0) {
    throw std::invalid_argument("CGM sample outside plausible range");
  }
  OutputRow H = OutputRow::Zero();
  H(0) = p.mgdl_per_mmoll() / p.V_G();

  const double y_pred = glucose_of(s.x_hat, p);
  const double innov = y_cgm - y_pred;
  const double S = (H * s.P * H.transpose())(0) + cfg.R_meas;

  if (info) {
    info->innovation = innov;
    info->innovation_var = S;
    info->rejected = false;
  }
  if (std::abs(innov) > cfg.gate_sigmas * std::sqrt(S)) {
    if (info) info->rejected = true;
    return s;
  }

  const StateVec K = s.P * H.transpose() / S;
  EkfState out = s;
  StateVec x = s.x_hat.as_vector() + K * innov;
  out.x_hat = ModelState::from_vector(x);
  clamp_nonnegative(out.x_hat);

  const StateMat IKH = StateMat::Identity() - K * H;
  out.P = IKH * s.P * IKH.transpose() + K * cfg.R_meas * K.transpose();
  symmetrize_and_floor(out.P);
  return out;
}

}  // namespace haid
