#include "haid/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace haid {

void MpcConfig::validate() const {
  if (Np < 1 || Nc < 1 || Np < Nc) {
    throw std::invalid_argument("horizons must satisfy Np >= Nc >= 1");
  }
  if (Q_weight <= 0.0 || R_weight <= 0.0) {
    throw std::invalid_argument("cost weights must be positive");
  }
  if (!(N_tdi_max > N_tdi_min && N_tdi_min > 0.0)) {
    throw std::invalid_argument("TDI bound multipliers out of order");
  }
  if (Ts <= 0.0) {
    throw std::invalid_argument("sampling interval must be positive");
  }
}

double compute_iob(const std::vector<DosingRecord>& history, double t_now,
                   const TherapyProfile& profile, double Ts) {
  const double nominal_step = profile.u_basal * Ts / 60.0;  // U per interval
  double iob = 0.0;
  for (const DosingRecord& rec : history) {
    if (rec.t > t_now) continue;
    const double age = t_now - rec.t;
    const double decay = std::max(0.0, 1.0 - age / profile.DIA);
    if (decay <= 0.0) continue;
    double active_amount = rec.amount;
    if (rec.kind == DoseKind::kBasalStep) {
      active_amount = std::max(0.0, rec.amount - nominal_step);
    }
    iob += active_amount * decay;
  }
  return iob;
}

RocResult compute_roc(const std::vector<CgmSample>& cgm_history,
                      double t_now) {
  std::vector<CgmSample> recent;
  for (auto it = cgm_history.rbegin(); it != cgm_history.rend(); ++it) {
    if (it->t > t_now) continue;
    if (it->t <= t_now - 15.0) break;
    recent.push_back(*it);
    if (recent.size() == 3) break;
  }
  RocResult out;
  if (recent.size() < 2) {
    out.cold_start = true;
    return out;
  }
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  const double n = static_cast<double>(recent.size());
  for (const CgmSample& s : recent) {
    st += s.t;
    sy += s.value;
    stt += s.t * s.t;
    sty += s.t * s.value;
  }
  const double denom = n * stt - st * st;
  if (denom <= 0.0) {
    out.cold_start = true;
    return out;
  }
  out.slope = (n * sty - st * sy) / denom;
  return out;
}

RateBounds adaptive_bounds(double y_cgm, double roc, double iob,
                           const TherapyProfile& profile,
                           const MpcConfig& cfg) {
  const double hourly_basal_ref = profile.TDI_basal / 24.0;  // U/h

  RateBounds b;
  const double iob_threshold = cfg.N_tdi_max * hourly_basal_ref;
  if (iob <= iob_threshold) {
    b.lo = 0.0;
    b.hi = cfg.N_tdi_max * hourly_basal_ref;
  } else {
    b.lo = profile.u_basal;
    b.hi = cfg.N_tdi_min * hourly_basal_ref;
  }
  if (b.lo > b.hi) b.lo = b.hi;

  if (y_cgm <= 70.0) {
    b.lo = 0.0;
    b.hi = 0.0;
  } else if (y_cgm < 200.0 && roc <= -cfg.N_roc_high) {
    b.lo = 0.0;
    b.hi = 0.0;
  } else if (y_cgm <= 120.0) {
    b.lo = std::max(b.lo, 0.0);
    b.hi = std::min(b.hi, profile.u_basal);
  }

  if (!(b.lo <= b.hi)) {
    throw std::logic_error("insulin bound intersection came out empty");
  }
  return b;
}

QpProblem build_qp(const LinearizedModel& model, double u_prev,
                   const RateBounds& bounds, const MpcConfig& cfg,
                   const TherapyProfile& profile) {
  cfg.validate();
  const int Np = cfg.Np;
  const int Nc = cfg.Nc;

  // Predictions are formed for the deviation state started at zero (the
  // model is linearized at the current estimate each step), so the free
  // response carries only the drift and the operating-input offset.
  const StateVec b_rate = model.B * kMuPerMinPerUh;  // per U/h of input

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(Np, Nc);
  Eigen::VectorXd y_free = Eigen::VectorXd::Zero(Np);

  StateVec free_acc = StateVec::Zero();   // deviation state under U == 0
  std::vector<StateVec> input_cols(Nc, StateVec::Zero());
  const StateVec affine = model.drift - model.B * model.u_op;

  for (int k = 0; k < Np; ++k) {
    // advance one step: x_{k+1} = A x_k + affine + sum_j b_rate * U_j
    free_acc = (model.A * free_acc + affine).eval();
    for (int j = 0; j < Nc; ++j) {
      input_cols[j] = (model.A * input_cols[j]).eval();
    }
    const int move = std::min(k, Nc - 1);  // held last move beyond Nc
    input_cols[move] += b_rate;
    y_free(k) = model.y_op + (model.C * free_acc)(0);
    for (int j = 0; j < Nc; ++j) {
      S(k, j) = (model.C * input_cols[j])(0);
    }
  }

  const double ub2 = profile.u_basal * profile.u_basal;
  const double q = cfg.Q_weight / ub2;
  const double r_w = cfg.R_weight / ub2;

  // move-increment map: D U - d with d = (u_prev, 0, ...)
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(Nc, Nc);
  for (int i = 0; i < Nc; ++i) {
    D(i, i) = 1.0;
    if (i > 0) D(i, i - 1) = -1.0;
  }
  Eigen::VectorXd d = Eigen::VectorXd::Zero(Nc);
  d(0) = u_prev;

  const Eigen::VectorXd e = y_free.array() - cfg.r;

  QpProblem qp;
  qp.H = 2.0 * (q * S.transpose() * S + r_w * D.transpose() * D);
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();
  qp.g = 2.0 * (q * S.transpose() * e - r_w * D.transpose() * d);
  qp.lb = Eigen::VectorXd::Constant(Nc, bounds.lo);
  qp.ub = Eigen::VectorXd::Constant(Nc, bounds.hi);
  qp.x0 = Eigen::VectorXd::Constant(Nc, std::min(std::max(u_prev, bounds.lo), bounds.hi));

  if (std::isfinite(cfg.delta_u_min) || std::isfinite(cfg.delta_u_max)) {
    const double dlo = cfg.delta_u_min;
    const double dhi = cfg.delta_u_max;
    // first move limit folds into the box
    if (std::isfinite(dlo)) qp.lb(0) = std::max(qp.lb(0), u_prev + dlo);
    if (std::isfinite(dhi)) qp.ub(0) = std::min(qp.ub(0), u_prev + dhi);
    if (qp.lb(0) > qp.ub(0)) qp.lb(0) = qp.ub(0) = std::min(std::max(u_prev, bounds.lo), bounds.hi);
    if (Nc > 1) {
      qp.rate_rows = Eigen::MatrixXd::Zero(Nc - 1, Nc);
      qp.rate_lb = Eigen::VectorXd::Constant(Nc - 1, dlo);
      qp.rate_ub = Eigen::VectorXd::Constant(Nc - 1, dhi);
      for (int i = 1; i < Nc; ++i) {
        qp.rate_rows(i - 1, i) = 1.0;
        qp.rate_rows(i - 1, i - 1) = -1.0;
      }
    }
  }
  return qp;
}

MpcDecision mpc_step(const EkfState& ekf,
                     const std::vector<CgmSample>& cgm_history,
                     const std::vector<DosingRecord>& dosing_history,
                     double u_prev, const TherapyProfile& profile,
                     const MpcConfig& cfg, const PatientParameters& p) {
  MpcDecision out;
  if (cgm_history.empty()) {
    throw std::invalid_argument("controller needs at least one CGM sample");
  }
  const double t_now = ekf.t;
  const double y_cgm = cgm_history.back().value;
  const RocResult roc = compute_roc(cgm_history, t_now);
  const double iob = compute_iob(dosing_history, t_now, profile, cfg.Ts);

  out.roc = roc.slope;
  out.iob = iob;
  out.bounds = adaptive_bounds(y_cgm, roc.slope, iob, profile, cfg);

  try {
    const LinearizedModel lm =
        linearize(ekf.x_hat, u_prev * kMuPerMinPerUh, p, cfg.Ts);
    const QpProblem qp = build_qp(lm, u_prev, out.bounds, cfg, profile);
    const QpSolution sol = solve_qp(qp);
    out.qp_iterations = sol.iterations;
    out.kkt_residual = sol.kkt_residual;
    if (sol.status == QpStatus::kOptimal) {
      out.rate = sol.x(0);
    } else {
      out.degraded = true;
      out.rate = std::min(std::max(u_prev, out.bounds.lo), out.bounds.hi);
    }
  } catch (const std::exception&) {
    out.degraded = true;
    out.rate = std::min(u_prev, out.bounds.hi);
    out.rate = std::max(out.rate, out.bounds.lo);
  }
  // commanded rate honors the intersected bounds exactly
  out.rate = std::min(std::max(out.rate, out.bounds.lo), out.bounds.hi);
  return out;
}

}  // namespace haid
