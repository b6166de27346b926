#include "haid/hovorka.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace haid {

namespace {

constexpr double kF01cBreak = 4.5;  // mmol/L
constexpr double kFRBreak = 9.0;    // mmol/L
constexpr double kFRSlope = 0.003;  // 1/min

void require_positive(double v, const char* name) {
  if (!std::isfinite(v) || v <= 0.0) {
    throw std::invalid_argument(std::string("patient parameter ") + name +
                                " must be positive and finite");
  }
}

}  // namespace

void PatientParameters::validate() const {
  require_positive(k12, "k12");
  require_positive(EGP0_per_kg, "EGP0_per_kg");
  require_positive(k_a1, "k_a1");
  require_positive(SI1, "SI1");
  require_positive(k_a2, "k_a2");
  require_positive(SI2, "SI2");
  require_positive(k_a3, "k_a3");
  require_positive(SI3, "SI3");
  require_positive(tau_S, "tau_S");
  require_positive(k_e, "k_e");
  require_positive(AG, "AG");
  if (AG > 1.0) {
    throw std::invalid_argument("patient parameter AG must be in (0, 1]");
  }
  require_positive(M_wg, "M_wg");
  require_positive(tau_D, "tau_D");
  require_positive(V_G_per_kg, "V_G_per_kg");
  require_positive(V_I_per_kg, "V_I_per_kg");
  require_positive(F01_per_kg, "F01_per_kg");
  require_positive(BW, "BW");
}

StateVec ModelState::as_vector() const {
  StateVec v;
  v << Q1, Q2, x1, x2, x3, S1, S2, I, D1, D2;
  return v;
}

ModelState ModelState::from_vector(const StateVec& v) {
  ModelState x;
  x.Q1 = v(0);
  x.Q2 = v(1);
  x.x1 = v(2);
  x.x2 = v(3);
  x.x3 = v(4);
  x.S1 = v(5);
  x.S2 = v(6);
  x.I = v(7);
  x.D1 = v(8);
  x.D2 = v(9);
  return x;
}

bool ModelState::all_finite() const {
  return as_vector().allFinite();
}

double glucose_of(const ModelState& x, const PatientParameters& p) {
  return (x.Q1 / p.V_G()) * p.mgdl_per_mmoll();
}

double mgdl_from_mmoll(double mmoll, const PatientParameters& p) {
  return mmoll * p.mgdl_per_mmoll();
}

double mmoll_from_mgdl(double mgdl, const PatientParameters& p) {
  return mgdl / p.mgdl_per_mmoll();
}

ModelState derivatives(const ModelState& x, const ModelInput& in,
                       const PatientParameters& p) {
  const double V_G = p.V_G();
  const double G = x.Q1 / V_G;  // mmol/L

  const double F01c = (G >= kF01cBreak) ? p.F01() : p.F01() * G / kF01cBreak;
  const double F_R = (G >= kFRBreak) ? kFRSlope * (G - kFRBreak) * V_G : 0.0;
  const double EGP = std::max(0.0, p.EGP0() * (1.0 - x.x3));

  const double U_G = x.D2 / p.tau_D;  // mmol/min gut appearance

  ModelState dx;
  dx.Q1 = -x.x1 * x.Q1 + p.k12 * x.Q2 - F01c - F_R + EGP + U_G;
  dx.Q2 = x.x1 * x.Q1 - (p.k12 + x.x2) * x.Q2;
  dx.x1 = -p.k_a1 * x.x1 + p.k_b1() * x.I;
  dx.x2 = -p.k_a2 * x.x2 + p.k_b2() * x.I;
  dx.x3 = -p.k_a3 * x.x3 + p.k_b3() * x.I;
  dx.S1 = in.u - x.S1 / p.tau_S;
  dx.S2 = (x.S1 - x.S2) / p.tau_S;
  dx.I = x.S2 / (p.tau_S * p.V_I()) - p.k_e * x.I;
  const double d_mmol = in.d * p.AG * 1000.0 / p.M_wg;  // g/min -> mmol/min
  dx.D1 = d_mmol - x.D1 / p.tau_D;
  dx.D2 = (x.D1 - x.D2) / p.tau_D;
  return dx;
}

ModelState integrate_step(const ModelState& x, const ModelInput& in,
                          const PatientParameters& p, double dt,
                          IntegrationStats* stats) {
  const StateVec x0 = x.as_vector();
  const StateVec k1 = derivatives(x, in, p).as_vector();
  const StateVec k2 =
      derivatives(ModelState::from_vector(x0 + 0.5 * dt * k1), in, p)
          .as_vector();
  const StateVec k3 =
      derivatives(ModelState::from_vector(x0 + 0.5 * dt * k2), in, p)
          .as_vector();
  const StateVec k4 =
      derivatives(ModelState::from_vector(x0 + dt * k3), in, p).as_vector();
  StateVec next = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  for (int i = 0; i < kStateDim; ++i) {
    if (next(i) < 0.0) {
      next(i) = 0.0;
      if (stats) ++stats->clamp_events;
    }
  }
  ModelState out = ModelState::from_vector(next);
  if (!out.all_finite()) {
    throw std::runtime_error("model integration produced a non-finite state");
  }
  return out;
}

ModelState integrate_interval(const ModelState& x, const ModelInput& in,
                              const PatientParameters& p, double duration,
                              double substep,
                              IntegrationStats* stats) {
  if (duration < 0.0 || substep <= 0.0) {
    throw std::invalid_argument("integration interval and substep must be positive");
  }
  ModelState cur = x;
  double t = 0.0;
  while (t < duration - 1e-12) {
    const double dt = std::min(substep, duration - t);
    cur = integrate_step(cur, in, p, dt, stats);
    t += dt;
  }
  return cur;
}

SteadyState find_steady_state(double glucose_mgdl, const PatientParameters& p) {
  if (!(glucose_mgdl >= 40.0 && glucose_mgdl <= 400.0)) {
    throw std::invalid_argument("steady-state glucose target out of range");
  }
  const double V_G = p.V_G();
  const double G = mmoll_from_mgdl(glucose_mgdl, p);  // mmol/L
  const double Q1 = G * V_G;
  const double F01c = (G >= kF01cBreak) ? p.F01() : p.F01() * G / kF01cBreak;
  const double F_R = (G >= kFRBreak) ? kFRSlope * (G - kFRBreak) * V_G : 0.0;

  // With the x chains at their equilibria the glucose balance collapses to a
  // strictly decreasing function of plasma insulin.
  auto residual = [&](double I) {
    const double x1 = p.SI1 * I;
    const double x2 = p.SI2 * I;
    const double x3 = p.SI3 * I;
    const double Q2 = (x2 + p.k12 > 0.0) ? x1 * Q1 / (x2 + p.k12) : 0.0;
    const double EGP = std::max(0.0, p.EGP0() * (1.0 - x3));
    return EGP + p.k12 * Q2 - x1 * Q1 - F01c - F_R;
  };

  if (residual(0.0) <= 0.0) {
    throw std::runtime_error(
        "no positive-insulin equilibrium exists at the requested glucose");
  }
  double lo = 0.0;
  double hi = 1.0;
  while (residual(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e9) {
      throw std::runtime_error(
          "no positive-insulin equilibrium exists at the requested glucose");
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double I = 0.5 * (lo + hi);
  const double u = I * p.k_e * p.V_I();

  SteadyState ss;
  ss.u_ss = u;
  ss.x.Q1 = Q1;
  ss.x.x1 = p.SI1 * I;
  ss.x.x2 = p.SI2 * I;
  ss.x.x3 = p.SI3 * I;
  ss.x.Q2 = ss.x.x1 * Q1 / (ss.x.x2 + p.k12);
  ss.x.S1 = p.tau_S * u;
  ss.x.S2 = p.tau_S * u;
  ss.x.I = I;
  ss.x.D1 = 0.0;
  ss.x.D2 = 0.0;
  return ss;
}

void jacobians(const ModelState& x, const ModelInput& in,
               const PatientParameters& p, StateMat& A_c, StateVec& B_c) {
  (void)in;
  const double V_G = p.V_G();
  const double G = x.Q1 / V_G;

  A_c.setZero();
  B_c.setZero();

  double dQ1 = -x.x1;
  if (G < kF01cBreak) dQ1 -= p.F01() / (kF01cBreak * V_G);
  if (G >= kFRBreak) dQ1 -= kFRSlope;
  A_c(0, 0) = dQ1;
  A_c(0, 1) = p.k12;
  A_c(0, 2) = -x.Q1;
  A_c(0, 4) = (p.EGP0() * (1.0 - x.x3) >= 0.0) ? -p.EGP0() : 0.0;
  A_c(0, 9) = 1.0 / p.tau_D;

  A_c(1, 0) = x.x1;
  A_c(1, 1) = -(p.k12 + x.x2);
  A_c(1, 2) = x.Q1;
  A_c(1, 3) = -x.Q2;

  A_c(2, 2) = -p.k_a1;
  A_c(2, 7) = p.k_b1();
  A_c(3, 3) = -p.k_a2;
  A_c(3, 7) = p.k_b2();
  A_c(4, 4) = -p.k_a3;
  A_c(4, 7) = p.k_b3();

  A_c(5, 5) = -1.0 / p.tau_S;
  A_c(6, 5) = 1.0 / p.tau_S;
  A_c(6, 6) = -1.0 / p.tau_S;
  A_c(7, 6) = 1.0 / (p.tau_S * p.V_I());
  A_c(7, 7) = -p.k_e;

  A_c(8, 8) = -1.0 / p.tau_D;
  A_c(9, 8) = 1.0 / p.tau_D;
  A_c(9, 9) = -1.0 / p.tau_D;

  B_c(5) = 1.0;
}

namespace {

// exp(M * t) for a small matrix via scaled-and-squared Taylor series.
Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  const double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  Eigen::MatrixXd A = M;
  if (norm > 0.5) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
    A /= std::pow(2.0, squarings);
  }
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 60; ++k) {
    term = (term * A) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  for (int s = 0; s < squarings; ++s) {
    result = result * result;
  }
  return result;
}

}  // namespace

LinearizedModel linearize(const ModelState& x_op, double u_op,
                          const PatientParameters& p, double Ts) {
  if (Ts <= 0.0) {
    throw std::invalid_argument("sampling interval must be positive");
  }
  StateMat A_c;
  StateVec B_c;
  ModelInput in;
  in.u = u_op;
  jacobians(x_op, in, p, A_c, B_c);

  const StateVec f0 = derivatives(x_op, in, p).as_vector();

  // exp of the augmented block [[A B f0],[0 0 0],[0 0 0]] * Ts produces the
  // ZOH transition, input, and affine-drift maps in one pass.
  const int n = kStateDim;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 2, n + 2);
  aug.topLeftCorner(n, n) = A_c;
  aug.block(0, n, n, 1) = B_c;
  aug.block(0, n + 1, n, 1) = f0;
  const Eigen::MatrixXd E = expm(aug * Ts);

  LinearizedModel lm;
  lm.A = E.topLeftCorner(n, n);
  lm.B = E.block(0, n, n, 1);
  lm.drift = E.block(0, n + 1, n, 1);
  lm.C.setZero();
  lm.C(0) = p.mgdl_per_mmoll() / p.V_G();
  lm.x_op = x_op;
  lm.u_op = u_op;
  lm.y_op = glucose_of(x_op, p);
  lm.Ts = Ts;
  return lm;
}

}  // namespace haid
