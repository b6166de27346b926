#pragma once

#include <cstdint>
#include <vector>

#include "haid/hovorka.hpp"
#include "haid/scenario.hpp"

namespace haid {

/// Everything the fitter may see from a training run: CGM, the insulin the
/// controller actually delivered, and the meals as announced.
struct FitInputs {
  std::vector<CgmSample> cgm;                   // uniform 5-min grid
  std::vector<double> insulin_mU_min;           // rate over each interval
  std::vector<std::pair<double, double>> meals; // (t min, announced g)
  double Ts = 5.0;
};

FitInputs fit_inputs_from_trace(const SimulationTrace& trace, double Ts = 5.0);

struct FitConfig {
  double lo_factor = 0.2;  // bound: population value scaled down
  double hi_factor = 5.0;  // bound: population value scaled up
  int starts = 5;
  int max_evals_per_start = 800;
  double diameter_tol = 1e-4;  // log-space simplex convergence
  std::uint64_t seed = 0;
};

struct FitResult {
  PatientParameters params;
  double rmse = 0.0;  // mg/dL
  int evaluations = 0;
  bool converged = false;
  bool bound_active = false;
  double top_spread = 0.0;  // RMSE spread of the best starts (flatness)
};

/// Open-loop prediction of glucose on the CGM grid from recorded inputs,
/// starting at the model equilibrium matching the first CGM sample.
/// Throws if that equilibrium does not exist for the candidate parameters.
std::vector<double> simulate_for_fit(const PatientParameters& params,
                                     const FitInputs& in);

double fit_rmse(const PatientParameters& params, const FitInputs& in);

/// Simplex search over log-scaled (k_e, V_G_per_kg, SI1, SI2, tau_D, tau_S),
/// clamped to [lo_factor, hi_factor] x population, multi-started; all other
/// parameters stay at `base`.
FitResult fit(const FitInputs& in, const PatientParameters& base,
              const FitConfig& cfg);

}  // namespace haid
