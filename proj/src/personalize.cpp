#include "haid/personalize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "haid/rng.hpp"

namespace haid {

FitInputs fit_inputs_from_trace(const SimulationTrace& trace, double Ts) {
  FitInputs in;
  in.Ts = Ts;
  in.cgm.reserve(trace.rows.size());
  in.insulin_mU_min.reserve(trace.rows.size());
  for (const TraceRow& row : trace.rows) {
    in.cgm.push_back({row.t, row.cgm});
    in.insulin_mU_min.push_back(row.basal_uh * kMuPerMinPerUh +
                                (row.prandial_u + row.correction_u) * 1000.0 /
                                    Ts);
    if (row.meal_announced_g > 0.0) {
      in.meals.emplace_back(row.t, row.meal_announced_g);
    }
  }
  return in;
}

std::vector<double> simulate_for_fit(const PatientParameters& params,
                                     const FitInputs& in) {
  if (in.cgm.size() < 2) {
    throw std::invalid_argument("fit inputs need at least two CGM samples");
  }
  params.validate();
  ModelState x = find_steady_state(
                     std::min(350.0, std::max(45.0, in.cgm.front().value)),
                     params)
                     .x;
  std::vector<double> pred;
  pred.reserve(in.cgm.size());
  pred.push_back(glucose_of(x, params));
  std::size_t meal_idx = 0;
  for (std::size_t k = 0; k + 1 < in.cgm.size(); ++k) {
    const double t0 = in.cgm[k].t;
    const double t1 = in.cgm[k + 1].t;
    while (meal_idx < in.meals.size() && in.meals[meal_idx].first <= t0 + 1e-9) {
      x.D1 += 1000.0 * params.AG * in.meals[meal_idx].second / params.M_wg;
      ++meal_idx;
    }
    ModelInput inp;
    inp.u = k < in.insulin_mU_min.size() ? in.insulin_mU_min[k] : 0.0;
    x = integrate_interval(x, inp, params, t1 - t0, 1.0);
    pred.push_back(glucose_of(x, params));
  }
  return pred;
}

double fit_rmse(const PatientParameters& params, const FitInputs& in) {
  const std::vector<double> pred = simulate_for_fit(params, in);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - in.cgm[i].value;
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

namespace {

constexpr int kDim = 6;

PatientParameters apply_log_point(const PatientParameters& base,
                                  const std::array<double, kDim>& z) {
  PatientParameters p = base;
  p.k_e = base.k_e * std::exp(z[0]);
  p.V_G_per_kg = base.V_G_per_kg * std::exp(z[1]);
  p.SI1 = base.SI1 * std::exp(z[2]);
  p.SI2 = base.SI2 * std::exp(z[3]);
  p.tau_D = base.tau_D * std::exp(z[4]);
  p.tau_S = base.tau_S * std::exp(z[5]);
  return p;
}

struct SimplexPoint {
  std::array<double, kDim> z;
  double value;
};

}  // namespace

FitResult fit(const FitInputs& in, const PatientParameters& base,
              const FitConfig& cfg) {
  const double z_lo = std::log(cfg.lo_factor);
  const double z_hi = std::log(cfg.hi_factor);

  int evals = 0;
  auto clamp_z = [&](std::array<double, kDim> z) {
    for (double& v : z) v = std::min(z_hi, std::max(z_lo, v));
    return z;
  };
  auto objective = [&](const std::array<double, kDim>& z_raw) {
    const std::array<double, kDim> z = clamp_z(z_raw);
    ++evals;
    try {
      return fit_rmse(apply_log_point(base, z), in);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // start points: the population model plus Latin-hypercube draws
  std::vector<std::array<double, kDim>> starts;
  starts.push_back({0, 0, 0, 0, 0, 0});
  {
    Rng rng(derive_seed(cfg.seed, 0x61));
    const int extra = std::max(0, cfg.starts - 1);
    std::vector<std::vector<int>> strata(kDim, std::vector<int>(extra));
    for (int d = 0; d < kDim; ++d) {
      std::iota(strata[d].begin(), strata[d].end(), 0);
      for (int j = extra - 1; j > 0; --j) {
        const int pick =
            static_cast<int>(rng.uniform_u64() % static_cast<std::uint64_t>(j + 1));
        std::swap(strata[d][j], strata[d][pick]);
      }
    }
    for (int j = 0; j < extra; ++j) {
      std::array<double, kDim> z;
      for (int d = 0; d < kDim; ++d) {
        const double frac = (strata[d][j] + rng.uniform01()) / extra;
        z[d] = z_lo + frac * (z_hi - z_lo);
      }
      starts.push_back(z);
    }
  }

  FitResult best;
  best.rmse = std::numeric_limits<double>::infinity();
  std::vector<double> start_results;
  bool any_converged = false;
  std::array<double, kDim> best_z{};

  for (std::size_t si = 0; si < starts.size(); ++si) {
    // Nelder-Mead with standard coefficients
    std::vector<SimplexPoint> simplex;
    simplex.reserve(kDim + 1);
    {
      SimplexPoint p0{clamp_z(starts[si]), 0.0};
      p0.value = objective(p0.z);
      simplex.push_back(p0);
      for (int d = 0; d < kDim; ++d) {
        SimplexPoint p = p0;
        p.z[d] = std::min(z_hi, p.z[d] + 0.1);
        if (p.z[d] == p0.z[d]) p.z[d] = p0.z[d] - 0.1;
        p.value = objective(p.z);
        simplex.push_back(p);
      }
    }
    auto order = [&]() {
      std::stable_sort(simplex.begin(), simplex.end(),
                       [](const SimplexPoint& a, const SimplexPoint& b) {
                         return a.value < b.value;
                       });
    };
    order();

    const int eval_budget = cfg.max_evals_per_start;
    const int start_evals = evals;
    bool converged = false;
    while (evals - start_evals < eval_budget) {
      double diam = 0.0;
      for (int i = 1; i <= kDim; ++i) {
        for (int d = 0; d < kDim; ++d) {
          diam = std::max(diam, std::abs(simplex[i].z[d] - simplex[0].z[d]));
        }
      }
      if (diam < cfg.diameter_tol) {
        converged = true;
        break;
      }

      std::array<double, kDim> centroid{};
      for (int i = 0; i < kDim; ++i) {
        for (int d = 0; d < kDim; ++d) centroid[d] += simplex[i].z[d];
      }
      for (double& v : centroid) v /= kDim;

      const SimplexPoint& worst = simplex[kDim];
      std::array<double, kDim> refl;
      for (int d = 0; d < kDim; ++d) {
        refl[d] = centroid[d] + (centroid[d] - worst.z[d]);
      }
      const double f_refl = objective(refl);

      if (f_refl < simplex[0].value) {
        std::array<double, kDim> expo;
        for (int d = 0; d < kDim; ++d) {
          expo[d] = centroid[d] + 2.0 * (centroid[d] - worst.z[d]);
        }
        const double f_expo = objective(expo);
        if (f_expo < f_refl) {
          simplex[kDim] = {clamp_z(expo), f_expo};
        } else {
          simplex[kDim] = {clamp_z(refl), f_refl};
        }
      } else if (f_refl < simplex[kDim - 1].value) {
        simplex[kDim] = {clamp_z(refl), f_refl};
      } else {
        std::array<double, kDim> contr;
        const bool outside = f_refl < worst.value;
        for (int d = 0; d < kDim; ++d) {
          const double toward = outside ? refl[d] : worst.z[d];
          contr[d] = centroid[d] + 0.5 * (toward - centroid[d]);
        }
        const double f_contr = objective(contr);
        if (f_contr < std::min(f_refl, worst.value)) {
          simplex[kDim] = {clamp_z(contr), f_contr};
        } else {
          // shrink toward the best vertex
          for (int i = 1; i <= kDim; ++i) {
            for (int d = 0; d < kDim; ++d) {
              simplex[i].z[d] =
                  simplex[0].z[d] + 0.5 * (simplex[i].z[d] - simplex[0].z[d]);
            }
            simplex[i].value = objective(simplex[i].z);
          }
        }
      }
      order();
    }

    any_converged = any_converged || converged;
    start_results.push_back(simplex[0].value);
    if (simplex[0].value < best.rmse) {
      best.rmse = simplex[0].value;
      best_z = clamp_z(simplex[0].z);
      best.converged = converged;
    }
  }

  if (!std::isfinite(best.rmse)) {
    throw std::runtime_error("every fit start failed to simulate");
  }

  best.params = apply_log_point(base, best_z);
  best.evaluations = evals;
  for (double v : best_z) {
    if (std::abs(v - z_lo) < 1e-9 || std::abs(v - z_hi) < 1e-9) {
      best.bound_active = true;
    }
  }
  std::sort(start_results.begin(), start_results.end());
  const std::size_t top = std::min<std::size_t>(3, start_results.size());
  double finite_max = start_results[0];
  for (std::size_t i = 0; i < top; ++i) {
    if (std::isfinite(start_results[i])) finite_max = start_results[i];
  }
  best.top_spread = finite_max - start_results[0];
  return best;
}

}  // namespace haid
