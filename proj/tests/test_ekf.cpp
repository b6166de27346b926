#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "haid/ekf.hpp"
#include "haid/hovorka.hpp"

using namespace haid;

TEST_CASE("exact model with zero process noise tracks the plant for 24 h") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  EkfConfig cfg;
  cfg.Q_proc = StateVec::Zero();
  cfg.P0 = StateVec::Constant(1e-6);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);

  ModelState plant = ss.x;
  plant.D1 += 1000.0 * p.AG * 40.0 / p.M_wg;  // shared disturbance
  EkfState est = s;
  est.x_hat = plant;
  ModelInput in;
  in.u = ss.u_ss;
  for (int k = 0; k < 288; ++k) {
    plant = integrate_interval(plant, in, p, 5.0, 1.0);
    est = ekf_predict(est, in, p, cfg, 5.0);
  }
  CHECK(std::abs(glucose_of(est.x_hat, p) - glucose_of(plant, p)) < 1e-6);
}

TEST_CASE("prediction from equilibrium is a fixed point") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  const EkfConfig cfg = default_ekf_config(ss.x, 0.0);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  ModelInput in;
  in.u = ss.u_ss;
  s = ekf_predict(s, in, p, cfg, 5.0);
  CHECK(glucose_of(s.x_hat, p) == doctest::Approx(120.0).epsilon(1e-7));
  CHECK(s.t == doctest::Approx(5.0));
}

TEST_CASE("covariance trace grows under predict with process noise") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  EkfConfig cfg;
  cfg.P0 = StateVec::Constant(1e-10);
  cfg.Q_proc = StateVec::Constant(1e-4);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  ModelInput in;
  in.u = ss.u_ss;
  double prev = s.P.trace();
  for (int k = 0; k < 12; ++k) {
    s = ekf_predict(s, in, p, cfg, 5.0);
    CHECK(s.P.trace() > prev);
    prev = s.P.trace();
  }
}

TEST_CASE("zero innovation leaves the state estimate unchanged") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(140.0, p);
  const EkfConfig cfg = default_ekf_config(ss.x, 0.0);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  EkfUpdateInfo info;
  const EkfState u = ekf_update(s, 140.0, p, cfg, &info);
  CHECK(info.innovation == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(!info.rejected);
  CHECK((u.x_hat.as_vector() - s.x_hat.as_vector()).cwiseAbs().maxCoeff() <
        1e-9);
}

TEST_CASE("update never increases the covariance trace") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  const EkfConfig cfg = default_ekf_config(ss.x, 2.0);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  ModelInput in;
  in.u = ss.u_ss;
  for (int k = 0; k < 24; ++k) {
    s = ekf_predict(s, in, p, cfg, 5.0);
    const double pre = s.P.trace();
    s = ekf_update(s, 120.0 + (k % 5), p, cfg);
    CHECK(s.P.trace() <= pre + 1e-12);
  }
}

TEST_CASE("mismatched start converges within an hour of updates") {
  PatientParameters p;
  const SteadyState plant_eq = find_steady_state(180.0, p);
  const SteadyState filter_eq = find_steady_state(120.0, p);
  const EkfConfig cfg = default_ekf_config(filter_eq.x, 0.0);
  EkfState s = make_ekf_state(filter_eq.x, cfg, 0.0);

  ModelState plant = plant_eq.x;
  ModelInput in;
  in.u = plant_eq.u_ss;
  double err = 1e9;
  for (int k = 1; k <= 12; ++k) {
    plant = integrate_interval(plant, in, p, 5.0, 1.0);
    s = ekf_predict(s, in, p, cfg, 5.0);
    s = ekf_update(s, glucose_of(plant, p), p, cfg);
    err = std::abs(glucose_of(s.x_hat, p) - glucose_of(plant, p));
  }
  CHECK(err < 5.0);
}

TEST_CASE("innovation sequence settles with a matched plant") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  const EkfConfig cfg = default_ekf_config(ss.x, 0.0);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  ModelState plant = ss.x;
  plant.D1 += 1000.0 * p.AG * 30.0 / p.M_wg;  // filter does not see the meal
  ModelInput in;
  in.u = ss.u_ss;
  double last_innov = 1e9;
  for (int k = 1; k <= 48; ++k) {  // 4 h
    plant = integrate_interval(plant, in, p, 5.0, 1.0);
    s = ekf_predict(s, in, p, cfg, 5.0);
    EkfUpdateInfo info;
    s = ekf_update(s, glucose_of(plant, p), p, cfg, &info);
    last_innov = std::abs(info.innovation);
  }
  CHECK(last_innov < 0.5);
}

TEST_CASE("covariance stays symmetric positive semidefinite") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  const EkfConfig cfg = default_ekf_config(ss.x, 3.0);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  ModelInput in;
  in.u = ss.u_ss;
  for (int k = 0; k < 60; ++k) {
    s = ekf_predict(s, in, p, cfg, 5.0);
    s = ekf_update(s, 100.0 + 7.0 * ((k * 13) % 11), p, cfg);
    CHECK((s.P - s.P.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<StateMat> eig(s.P);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("absurd innovations are gated out") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  EkfConfig cfg = default_ekf_config(ss.x, 0.0);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  EkfUpdateInfo info;
  const EkfState u = ekf_update(s, 600.0, p, cfg, &info);
  CHECK(info.rejected);
  CHECK((u.x_hat.as_vector() - s.x_hat.as_vector()).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("measurements outside the plausible sensor range are refused") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  const EkfConfig cfg = default_ekf_config(ss.x, 0.0);
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  CHECK_THROWS_AS(ekf_update(s, 10.0, p, cfg), std::invalid_argument);
  CHECK_THROWS_AS(ekf_update(s, 700.0, p, cfg), std::invalid_argument);
}

TEST_CASE("covariance blow-up raises a divergence error") {
  PatientParameters p;
  const SteadyState ss = find_steady_state(120.0, p);
  EkfConfig cfg = default_ekf_config(ss.x, 0.0);
  cfg.trace_ceiling = 1e-9;
  EkfState s = make_ekf_state(ss.x, cfg, 0.0);
  ModelInput in;
  in.u = ss.u_ss;
  CHECK_THROWS_AS(ekf_predict(s, in, p, cfg, 5.0), std::runtime_error);
}
