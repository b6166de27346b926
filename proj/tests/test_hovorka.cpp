#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "haid/hovorka.hpp"
#include "haid/rng.hpp"

using namespace haid;

namespace {

ModelState random_state(Rng& rng) {
  ModelState x;
  x.Q1 = rng.uniform(20.0, 200.0);
  x.Q2 = rng.uniform(10.0, 150.0);
  x.x1 = rng.uniform(0.0, 0.1);
  x.x2 = rng.uniform(0.0, 0.05);
  x.x3 = rng.uniform(0.0, 0.8);
  x.S1 = rng.uniform(0.0, 2000.0);
  x.S2 = rng.uniform(0.0, 2000.0);
  x.I = rng.uniform(0.0, 60.0);
  x.D1 = rng.uniform(0.0, 300.0);
  x.D2 = rng.uniform(0.0, 300.0);
  return x;
}

}  // namespace

TEST_CASE("glucose conversion") {
  PatientParameters p;
  ModelState x;
  x.Q1 = 5.0 * p.V_G();
  CHECK(glucose_of(x, p) == doctest::Approx(90.08).epsilon(1e-12));
  x.Q1 = 0.0;
  CHECK(glucose_of(x, p) == 0.0);
  CHECK(mgdl_from_mmoll(mmoll_from_mgdl(137.0, p), p) ==
        doctest::Approx(137.0).epsilon(1e-12));
}

TEST_CASE("parameter validation rejects bad entries") {
  PatientParameters p;
  CHECK_NOTHROW(p.validate());
  p.tau_S = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = PatientParameters{};
  p.BW = -5.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("piecewise branches switch at their breakpoints") {
  PatientParameters p;
  ModelInput in;
  // non-insulin uptake saturates above 4.5 mmol/L, scales below
  ModelState hi;
  hi.Q1 = 9.5 * p.V_G();
  ModelState lo;
  lo.Q1 = 4.0 * p.V_G();
  const double dq_hi = derivatives(hi, in, p).Q1;
  const double dq_lo = derivatives(lo, in, p).Q1;
  // at 9.5 mmol/L renal excretion is active as well
  const double expected_hi = -p.F01() - 0.003 * (9.5 - 9.0) * p.V_G() +
                             p.EGP0();
  const double expected_lo = -p.F01() * 4.0 / 4.5 + p.EGP0();
  CHECK(dq_hi == doctest::Approx(expected_hi).epsilon(1e-12));
  CHECK(dq_lo == doctest::Approx(expected_lo).epsilon(1e-12));
}

TEST_CASE("piecewise terms are continuous at breakpoints") {
  PatientParameters p;
  ModelInput in;
  for (double g_break : {4.5, 9.0}) {
    ModelState a, b;
    a.Q1 = (g_break - 1e-9) * p.V_G();
    b.Q1 = (g_break + 1e-9) * p.V_G();
    CHECK(std::abs(derivatives(a, in, p).Q1 - derivatives(b, in, p).Q1) <
          1e-6);
  }
  // EGP clip: x3 slightly below and above full suppression
  ModelState a, b;
  a.Q1 = 6.0 * p.V_G();
  b.Q1 = a.Q1;
  a.x3 = 1.0 - 1e-9;
  b.x3 = 1.0 + 1e-9;
  CHECK(std::abs(derivatives(a, in, p).Q1 - derivatives(b, in, p).Q1) < 1e-6);
}

TEST_CASE("meal rate input feeds the gut compartment") {
  PatientParameters p;
  ModelState x;
  ModelInput in;
  in.d = 3.0;  // g/min
  const double dD1 = derivatives(x, in, p).D1;
  CHECK(dD1 == doctest::Approx(1000.0 * p.AG * 3.0 / p.M_wg).epsilon(1e-12));
}

TEST_CASE("equilibrium is a fixed point and stays put for 24 h") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  CHECK(ss.u_ss == doctest::Approx(6.28017942637).epsilon(1e-9));
  CHECK(glucose_of(ss.x, p) == doctest::Approx(120.0).epsilon(1e-9));

  // residual of the ODE right-hand side
  ModelInput in;
  in.u = ss.u_ss;
  const StateVec f = derivatives(ss.x, in, p).as_vector();
  CHECK(f.cwiseAbs().maxCoeff() < 1e-8);

  ModelState x = integrate_interval(ss.x, in, p, 1440.0, 1.0);
  CHECK(std::abs(glucose_of(x, p) - 120.0) < 1.0);

  // one 5-min step stays within 1e-7 relative
  ModelState x5 = integrate_step(ss.x, in, p, 5.0);
  const StateVec rel = (x5.as_vector() - ss.x.as_vector()).cwiseQuotient(
      ss.x.as_vector().cwiseMax(1e-9));
  CHECK(rel.cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("equilibrium infeasible when EGP suppression cannot reach balance") {
  PatientParameters p;
  p.EGP0_per_kg = 1e-5;  // almost no production to trade against uptake
  CHECK_THROWS_AS(find_steady_state(250.0, p), std::runtime_error);
}

TEST_CASE("insulin subsystem decays to zero without input") {
  PatientParameters p;
  ModelState x;
  x.S1 = 500.0;
  x.S2 = 400.0;
  x.I = 30.0;
  x.Q1 = 6.0 * p.V_G();
  ModelInput in;
  ModelState z = integrate_interval(x, in, p, 2000.0, 1.0);
  CHECK(z.S1 < 1e-6);
  CHECK(z.S2 < 1e-6);
  CHECK(z.I < 1e-6);
}

TEST_CASE("meal subsystem conserves carbohydrate mass") {
  PatientParameters p;
  p.AG = 1.0;
  const double grams = 60.0;
  ModelState x;
  x.D1 = 1000.0 * p.AG * grams / p.M_wg;
  // integrate U_G = D2/tau_D with trapezoid at dt = 0.5 over 12 h
  ModelInput in;
  double absorbed = 0.0;
  double prev_rate = x.D2 / p.tau_D;
  for (int k = 0; k < 1440; ++k) {
    x = integrate_step(x, in, p, 0.5);
    const double rate = x.D2 / p.tau_D;
    absorbed += 0.5 * 0.5 * (prev_rate + rate);
    prev_rate = rate;
  }
  const double expected = 1000.0 * grams / p.M_wg;
  CHECK(std::abs(absorbed - expected) / expected < 1e-3);
}

TEST_CASE("meal response golden regression") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  ModelState x = ss.x;
  x.D1 += 1000.0 * p.AG * 50.0 / p.M_wg;
  ModelInput in;
  in.u = ss.u_ss;
  double peak_g = 0.0, peak_t = 0.0, t = 0.0;
  for (int k = 0; k < 720; ++k) {
    x = integrate_step(x, in, p, 1.0);
    t += 1.0;
    const double g = glucose_of(x, p);
    if (g > peak_g) {
      peak_g = g;
      peak_t = t;
    }
  }
  // reference computed once at dt = 0.5: peak 302.786 mg/dL at 148.5 min
  CHECK(peak_g == doctest::Approx(302.786).epsilon(1e-4));
  CHECK(std::abs(peak_t - 148.5) <= 1.5);
  // glucose returns toward equilibrium afterwards
  CHECK(glucose_of(x, p) < 200.0);
}

TEST_CASE("negative-state clamping is counted") {
  PatientParameters p;
  ModelState x;
  x.Q1 = 50.0;
  x.I = 13500.0;  // action ramps so steeply mid-step that Q1 overshoots zero
  x.x3 = 1.5;
  IntegrationStats stats;
  ModelInput in;
  const ModelState next = integrate_step(x, in, p, 5.0, &stats);
  CHECK(stats.clamp_events > 0);
  CHECK(next.Q1 == 0.0);
}

TEST_CASE("analytic jacobians match central finite differences") {
  PatientParameters p;
  Rng rng(2024);
  double max_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ModelState x = random_state(rng);
    ModelInput in;
    in.u = rng.uniform(0.0, 40.0);
    StateMat A;
    StateVec B;
    jacobians(x, in, p, A, B);

    const StateVec v = x.as_vector();
    for (int j = 0; j < kStateDim; ++j) {
      const double h = std::max(1e-6 * std::abs(v(j)), 1e-9);
      StateVec vp = v, vm = v;
      vp(j) += h;
      vm(j) -= h;
      const StateVec fp =
          derivatives(ModelState::from_vector(vp), in, p).as_vector();
      const StateVec fm =
          derivatives(ModelState::from_vector(vm), in, p).as_vector();
      const StateVec col = (fp - fm) / (2.0 * h);
      for (int i = 0; i < kStateDim; ++i) {
        const double scale = std::max(std::abs(col(i)), 1e-3);
        max_rel = std::max(max_rel, std::abs(A(i, j) - col(i)) / scale);
      }
    }
    const double hu = 1e-4;
    ModelInput up = in, um = in;
    up.u += hu;
    um.u -= hu;
    const StateVec bcol = (derivatives(x, up, p).as_vector() -
                           derivatives(x, um, p).as_vector()) /
                          (2.0 * hu);
    for (int i = 0; i < kStateDim; ++i) {
      max_rel = std::max(max_rel, std::abs(B(i) - bcol(i)));
    }
  }
  CHECK(max_rel < 1e-5);
}

TEST_CASE("input sensitivity enters only through the first insulin depot") {
  PatientParameters p;
  ModelState x = find_steady_state(110.0, p).x;
  ModelInput in;
  in.u = 5.0;
  StateMat A;
  StateVec B;
  jacobians(x, in, p, A, B);
  for (int i = 0; i < kStateDim; ++i) {
    if (i == 5) {
      CHECK(B(i) == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(B(i) == 0.0);
    }
  }
}

TEST_CASE("discretization approaches identity as Ts shrinks") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(130.0, p);
  const LinearizedModel lm = linearize(ss.x, ss.u_ss, p, 1e-6);
  CHECK((lm.A - StateMat::Identity()).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(lm.B.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("linearized one-step prediction error scales quadratically") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(140.0, p);
  const LinearizedModel lm = linearize(ss.x, ss.u_ss, p, 5.0);

  auto error_for = [&](double eps) {
    StateVec dx = StateVec::Zero();
    dx(0) = eps * ss.x.Q1;
    dx(7) = eps * ss.x.I;
    const ModelState pert = ModelState::from_vector(ss.x.as_vector() + dx);
    ModelInput in;
    in.u = ss.u_ss;
    const StateVec truth =
        integrate_interval(pert, in, p, 5.0, 0.5).as_vector();
    const StateVec pred = ss.x.as_vector() + lm.A * dx + lm.drift;
    return (truth - pred).norm();
  };
  const double e1 = error_for(1e-3);
  const double e2 = error_for(1e-2);
  // ratio should track (1e-2 / 1e-3)^2 = 100
  CHECK(e2 / e1 > 30.0);
  CHECK(e2 / e1 < 300.0);
}

TEST_CASE("linearization drift reproduces the nonlinear step at the origin") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(150.0, p);
  ModelState off = ss.x;
  off.D2 += 20.0;  // not at equilibrium: drift must carry the free motion
  const LinearizedModel lm = linearize(off, ss.u_ss, p, 5.0);
  ModelInput in;
  in.u = ss.u_ss;
  const StateVec truth = integrate_interval(off, in, p, 5.0, 1.0).as_vector();
  const StateVec pred = off.as_vector() + lm.drift;
  CHECK((truth - pred).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(lm.y_op == doctest::Approx(glucose_of(off, p)).epsilon(1e-12));
}

TEST_CASE("output row maps accessible glucose to mg/dL") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  const LinearizedModel lm = linearize(ss.x, ss.u_ss, p, 5.0);
  for (int j = 0; j < kStateDim; ++j) {
    if (j == 0) {
      CHECK(lm.C(j) ==
            doctest::Approx(p.mgdl_per_mmoll() / p.V_G()).epsilon(1e-12));
    } else {
      CHECK(lm.C(j) == 0.0);
    }
  }
}
