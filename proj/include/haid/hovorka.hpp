#pragma once

#include <Eigen/Dense>

namespace haid {

inline constexpr int kStateDim = 10;

// mU/min carried by one U/h of infusion.
inline constexpr double kMuPerMinPerUh = 1000.0 / 60.0;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using OutputRow = Eigen::Matrix<double, 1, kStateDim>;

/// Hovorka model parameter set. Population values are the defaults;
/// per-kg quantities are stored normalized and scaled by BW on access.
struct PatientParameters {
  double k12 = 0.066;        // 1/min, inter-compartment transfer
  double EGP0_per_kg = 16.1e-3;  // mmol/min/kg, EGP at zero insulin
  double k_a1 = 0.006;       // 1/min
  double SI1 = 51.2e-4;      // 1/min per mU/L, transport sensitivity
  double k_a2 = 0.006;       // 1/min
  double SI2 = 8.2e-4;       // 1/min per mU/L, disposal sensitivity
  double k_a3 = 0.03;        // 1/min
  double SI3 = 520e-4;       // 1/min per mU/L, EGP sensitivity
  double tau_S = 55.0;       // min, sc insulin absorption
  double k_e = 0.138;        // 1/min, plasma insulin elimination
  double AG = 0.8;           // CHO bioavailability, (0, 1]
  double M_wg = 180.16;      // g/mol, glucose molecular weight
  double tau_D = 40.0;       // min, CHO absorption
  double V_G_per_kg = 0.16;  // L/kg
  double V_I_per_kg = 0.12;  // L/kg
  double F01_per_kg = 0.0097;  // mmol/min/kg, non-insulin-dependent uptake
  double BW = 70.0;          // kg

  double EGP0() const { return EGP0_per_kg * BW; }
  double V_G() const { return V_G_per_kg * BW; }
  double V_I() const { return V_I_per_kg * BW; }
  double F01() const { return F01_per_kg * BW; }
  double k_b1() const { return SI1 * k_a1; }
  double k_b2() const { return SI2 * k_a2; }
  double k_b3() const { return SI3 * k_a3; }
  double mgdl_per_mmoll() const { return M_wg / 10.0; }

  // Throws std::invalid_argument on a non-positive or non-finite entry.
  void validate() const;
};

/// Physiological state. Units: Q in mmol, x in 1/min, S in mU, I in mU/L,
/// D in mmol. All components are non-negative after any integration step.
struct ModelState {
  double Q1 = 0.0;  // accessible glucose mass
  double Q2 = 0.0;  // non-accessible glucose mass
  double x1 = 0.0;  // insulin action on transport
  double x2 = 0.0;  // insulin action on disposal
  double x3 = 0.0;  // insulin action on EGP
  double S1 = 0.0;  // sc insulin depot 1
  double S2 = 0.0;  // sc insulin depot 2
  double I = 0.0;   // plasma insulin
  double D1 = 0.0;  // gut CHO compartment 1
  double D2 = 0.0;  // gut CHO compartment 2

  StateVec as_vector() const;
  static ModelState from_vector(const StateVec& v);
  bool all_finite() const;
};

struct ModelInput {
  double u = 0.0;  // mU/min insulin infusion, zero-order hold
  double d = 0.0;  // g/min oral CHO rate
};

/// Discrete-time affine model around (x_op, u_op):
///   x_next = x_op + A (x - x_op) + B (u - u_op) + drift
///   y      = y_op + C (x - x_op)          [mg/dL]
/// with exact zero-order-hold discretization over Ts minutes.
struct LinearizedModel {
  StateMat A;
  StateVec B;       // sensitivity per mU/min
  OutputRow C;
  StateVec drift;   // affine term carrying f(x_op, u_op)
  ModelState x_op;
  double u_op = 0.0;  // mU/min
  double y_op = 0.0;  // mg/dL
  double Ts = 5.0;    // min
};

/// Plasma glucose in mg/dL: (Q1 / V_G) * M_wg / 10.
double glucose_of(const ModelState& x, const PatientParameters& p);
double mgdl_from_mmoll(double mmoll, const PatientParameters& p);
double mmoll_from_mgdl(double mgdl, const PatientParameters& p);

/// Right-hand side of the Hovorka ODEs, returned in state layout.
ModelState derivatives(const ModelState& x, const ModelInput& in,
                       const PatientParameters& p);

struct IntegrationStats {
  long clamp_events = 0;  // negative-component clamps across steps
};

/// One fixed-size RK4 step; negative components clamp to zero afterwards.
ModelState integrate_step(const ModelState& x, const ModelInput& in,
                          const PatientParameters& p, double dt,
                          IntegrationStats* stats = nullptr);

/// RK4 over [0, duration] in fixed substeps (last substep may be shorter).
ModelState integrate_interval(const ModelState& x, const ModelInput& in,
                              const PatientParameters& p, double duration,
                              double substep,
                              IntegrationStats* stats = nullptr);

struct SteadyState {
  ModelState x;
  double u_ss = 0.0;  // mU/min
};

/// Equilibrium at a target glucose with d = 0. The S/I/x chains are solved
/// in closed form; the Q1/Q2 balance reduces to a scalar root-solve in the
/// plasma-insulin level. Throws std::runtime_error when no positive-insulin
/// equilibrium exists at the target.
SteadyState find_steady_state(double glucose_mgdl, const PatientParameters& p);

/// Continuous-time Jacobians at (x, in). Piecewise branches evaluate at the
/// operating point; on a breakpoint the >= branch is taken.
void jacobians(const ModelState& x, const ModelInput& in,
               const PatientParameters& p, StateMat& A_c, StateVec& B_c);

/// ZOH discretization via the matrix exponential of the augmented
/// [A_c B_c f0; 0 0 0] block (scaled-and-squared series, tolerance 1e-12).
LinearizedModel linearize(const ModelState& x_op, double u_op,
                          const PatientParameters& p, double Ts);

}  // namespace haid
