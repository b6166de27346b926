#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "haid/hovorka.hpp"
#include "haid/metrics.hpp"
#include "haid/pipeline.hpp"
#include "haid/scenario.hpp"

namespace py = pybind11;
using namespace haid;

PYBIND11_MODULE(haid, m) {
  m.doc() = "glucose-insulin simulation and closed-loop dosing toolkit";

  py::class_<PatientParameters>(m, "PatientParameters")
      .def(py::init<>())
      .def_readwrite("k12", &PatientParameters::k12)
      .def_readwrite("EGP0_per_kg", &PatientParameters::EGP0_per_kg)
      .def_readwrite("k_a1", &PatientParameters::k_a1)
      .def_readwrite("SI1", &PatientParameters::SI1)
      .def_readwrite("k_a2", &PatientParameters::k_a2)
      .def_readwrite("SI2", &PatientParameters::SI2)
      .def_readwrite("k_a3", &PatientParameters::k_a3)
      .def_readwrite("SI3", &PatientParameters::SI3)
      .def_readwrite("tau_S", &PatientParameters::tau_S)
      .def_readwrite("k_e", &PatientParameters::k_e)
      .def_readwrite("AG", &PatientParameters::AG)
      .def_readwrite("M_wg", &PatientParameters::M_wg)
      .def_readwrite("tau_D", &PatientParameters::tau_D)
      .def_readwrite("V_G_per_kg", &PatientParameters::V_G_per_kg)
      .def_readwrite("V_I_per_kg", &PatientParameters::V_I_per_kg)
      .def_readwrite("F01_per_kg", &PatientParameters::F01_per_kg)
      .def_readwrite("BW", &PatientParameters::BW)
      .def("validate", &PatientParameters::validate);

  py::class_<ModelState>(m, "ModelState")
      .def(py::init<>())
      .def_readwrite("Q1", &ModelState::Q1)
      .def_readwrite("Q2", &ModelState::Q2)
      .def_readwrite("x1", &ModelState::x1)
      .def_readwrite("x2", &ModelState::x2)
      .def_readwrite("x3", &ModelState::x3)
      .def_readwrite("S1", &ModelState::S1)
      .def_readwrite("S2", &ModelState::S2)
      .def_readwrite("I", &ModelState::I)
      .def_readwrite("D1", &ModelState::D1)
      .def_readwrite("D2", &ModelState::D2)
      .def("as_vector", &ModelState::as_vector)
      .def_static("from_vector", &ModelState::from_vector);

  py::class_<ModelInput>(m, "ModelInput")
      .def(py::init<>())
      .def_readwrite("u", &ModelInput::u)
      .def_readwrite("d", &ModelInput::d);

  py::class_<SteadyState>(m, "SteadyState")
      .def_readonly("x", &SteadyState::x)
      .def_readonly("u_ss", &SteadyState::u_ss);

  py::class_<LinearizedModel>(m, "LinearizedModel")
      .def_readonly("A", &LinearizedModel::A)
      .def_readonly("B", &LinearizedModel::B)
      .def_readonly("C", &LinearizedModel::C)
      .def_readonly("drift", &LinearizedModel::drift)
      .def_readonly("u_op", &LinearizedModel::u_op)
      .def_readonly("y_op", &LinearizedModel::y_op)
      .def_readonly("Ts", &LinearizedModel::Ts);

  m.def("glucose_of", &glucose_of);
  m.def("find_steady_state", &find_steady_state);
  m.def("derivatives", &derivatives);
  m.def(
      "integrate_interval",
      [](const ModelState& x, const ModelInput& in, const PatientParameters& p,
         double duration, double substep) {
        return integrate_interval(x, in, p, duration, substep);
      },
      py::arg("x"), py::arg("input"), py::arg("params"), py::arg("duration"),
      py::arg("substep") = 1.0);
  m.def("linearize", &linearize);

  py::class_<TherapyProfile>(m, "TherapyProfile")
      .def(py::init<>())
      .def_readwrite("u_basal", &TherapyProfile::u_basal)
      .def_readwrite("TDI_basal", &TherapyProfile::TDI_basal)
      .def_readwrite("CR", &TherapyProfile::CR)
      .def_readwrite("CF", &TherapyProfile::CF)
      .def_readwrite("DIA", &TherapyProfile::DIA);

  py::class_<VirtualSubject>(m, "VirtualSubject")
      .def_readonly("index", &VirtualSubject::index)
      .def_readonly("plant_params", &VirtualSubject::plant_params)
      .def_readonly("controller_params", &VirtualSubject::controller_params)
      .def_readonly("profile", &VirtualSubject::profile)
      .def_readonly("seed", &VirtualSubject::seed);

  py::class_<CohortConfig>(m, "CohortConfig")
      .def(py::init<>())
      .def_readwrite("cv", &CohortConfig::cv)
      .def_readwrite("bw_lo", &CohortConfig::bw_lo)
      .def_readwrite("bw_hi", &CohortConfig::bw_hi)
      .def_readwrite("basal_share", &CohortConfig::basal_share);

  m.def(
      "generate_cohort",
      [](int n, std::uint64_t seed, const CohortConfig& cfg) {
        return generate_cohort(n, seed, cfg);
      },
      py::arg("n"), py::arg("seed"), py::arg("config") = CohortConfig{});

  py::class_<ScenarioSpec>(m, "ScenarioSpec")
      .def_readwrite("id", &ScenarioSpec::id)
      .def_readwrite("days", &ScenarioSpec::days)
      .def_readwrite("basal_bias", &ScenarioSpec::basal_bias)
      .def_readwrite("announce_delay", &ScenarioSpec::announce_delay)
      .def_readwrite("initial_glucose", &ScenarioSpec::initial_glucose)
      .def_readwrite("rescue_rule", &ScenarioSpec::rescue_rule);

  m.def("standard_scenario", &standard_scenario);
  m.def("standard_scenario_ids", &standard_scenario_ids);

  py::class_<TraceRow>(m, "TraceRow")
      .def_readonly("t", &TraceRow::t)
      .def_readonly("plant_bg", &TraceRow::plant_bg)
      .def_readonly("cgm", &TraceRow::cgm)
      .def_readonly("roc", &TraceRow::roc)
      .def_readonly("iob", &TraceRow::iob)
      .def_readonly("bound_lo", &TraceRow::bound_lo)
      .def_readonly("bound_hi", &TraceRow::bound_hi)
      .def_readonly("basal_uh", &TraceRow::basal_uh)
      .def_readonly("prandial_u", &TraceRow::prandial_u)
      .def_readonly("correction_u", &TraceRow::correction_u)
      .def_readonly("meal_true_g", &TraceRow::meal_true_g)
      .def_readonly("meal_announced_g", &TraceRow::meal_announced_g)
      .def_readonly("rescue_g", &TraceRow::rescue_g);

  py::class_<SimulationTrace>(m, "SimulationTrace")
      .def_readonly("scenario_id", &SimulationTrace::scenario_id)
      .def_readonly("subject_index", &SimulationTrace::subject_index)
      .def_readonly("days", &SimulationTrace::days)
      .def_readonly("rows", &SimulationTrace::rows)
      .def_readonly("degraded_steps", &SimulationTrace::degraded_steps)
      .def_readonly("ekf_rejections", &SimulationTrace::ekf_rejections);

  m.def(
      "run_scenario",
      [](const ScenarioSpec& spec, const VirtualSubject& subject,
         std::uint64_t seed, double noise_sd) {
        RunModuleConfigs cfgs;
        cfgs.noise.sd = noise_sd;
        cfgs.ekf_sensor_sd = noise_sd;
        return run_scenario(spec, subject, cfgs, seed);
      },
      py::arg("spec"), py::arg("subject"), py::arg("seed"),
      py::arg("noise_sd") = 0.0);

  py::class_<RangeShares>(m, "RangeShares")
      .def_readonly("TIR", &RangeShares::TIR)
      .def_readonly("TITR", &RangeShares::TITR)
      .def_readonly("TBR", &RangeShares::TBR)
      .def_readonly("TAR", &RangeShares::TAR)
      .def_readonly("TBR_lt54", &RangeShares::TBR_lt54)
      .def_readonly("TAR_gt250", &RangeShares::TAR_gt250);

  py::class_<Variability>(m, "Variability")
      .def_readonly("mean_bg", &Variability::mean_bg)
      .def_readonly("CV", &Variability::CV)
      .def_readonly("HBGI", &Variability::HBGI)
      .def_readonly("LBGI", &Variability::LBGI);

  py::class_<GlycemicReport>(m, "GlycemicReport")
      .def_readonly("range", &GlycemicReport::range)
      .def_readonly("var", &GlycemicReport::var)
      .def_readonly("hypo_per_day", &GlycemicReport::hypo_per_day)
      .def_readonly("hyper_per_day", &GlycemicReport::hyper_per_day);

  m.def(
      "compute_report",
      [](const SimulationTrace& trace, bool use_cgm) {
        return compute_report(trace, use_cgm);
      },
      py::arg("trace"), py::arg("use_cgm") = false);

  py::class_<RunOptions>(m, "RunOptions")
      .def(py::init<>())
      .def_readwrite("n", &RunOptions::n)
      .def_readwrite("seed", &RunOptions::seed)
      .def_readwrite("scenarios", &RunOptions::scenarios)
      .def_readwrite("noise", &RunOptions::noise)
      .def_readwrite("out_dir", &RunOptions::out_dir)
      .def_readwrite("workers", &RunOptions::workers)
      .def_readwrite("personalize", &RunOptions::personalize);

  py::class_<RunArtifacts>(m, "RunArtifacts")
      .def_readonly("files", &RunArtifacts::files)
      .def_readonly("warnings", &RunArtifacts::warnings)
      .def_readonly("config_hash", &RunArtifacts::config_hash);

  m.def("run_pipeline", &run_pipeline,
        py::call_guard<py::gil_scoped_release>());

  m.def("verify_runs", [](const std::string& golden, const std::string& fresh,
                          double tol) {
    auto r = verify_runs(golden, fresh, tol);
    return py::make_tuple(r.ok, r.detail);
  });
}
