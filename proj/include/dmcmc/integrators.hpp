#pragma once

// Reverse-S/ODE integrators running from sigma_start down to sigma_end.
// All of them integrate in sigma rather than t: with the geometric schedule the
// probability-flow ODE reads dx/dsigma = -sigma * s(x, sigma) and the reverse SDE
// injects variance d[sigma^2] per step.

#include "dmcmc/common.hpp"
#include "dmcmc/ve_process.hpp"

#include <string_view>

namespace dmcmc {

enum class IntegratorKind {
  kEulerMaruyama,
  kReverseDiffusion,
  kProbFlowEuler,
  kRk45,
  kKarrasDet,
  kKarrasStoch,
};

std::string_view to_string(IntegratorKind kind);
IntegratorKind integrator_from_string(std::string_view name);
bool is_stochastic(IntegratorKind kind);
const std::vector<IntegratorKind>& all_integrators();

struct IntegratorSpec {
  IntegratorKind kind = IntegratorKind::kKarrasDet;
  int steps = 10;       // ignored by rk45
  double rtol = 1e-5;   // rk45 only
  double atol = 1e-5;   // rk45 only
  double rho = 7.0;     // Karras ladder warp
  double churn = 0.0;   // karras_stoch
  double s_noise = 1.0; // karras_stoch
};

struct IntegratorRun {
  Vector x0;
  double sigma_start = 0.0;
  double sigma_end = 0.0;
};

struct IntegratorResult {
  Vector x_final;
  long nfe = 0;
  long steps = 0;
};

/// Fixed-step count that spends at most `budget` score evaluations (exactly, except
/// for the Karras samplers with an even budget, which use budget - 1). rk45 returns 0.
int steps_for_budget(IntegratorKind kind, int budget);

/// Score evaluations a fixed-step integrator performs for `steps` steps.
long nfe_for_steps(IntegratorKind kind, int steps);

/// sigma_i = (a^(1/rho) + i/n (b^(1/rho) - a^(1/rho)))^rho for i = 0..n.
std::vector<double> karras_ladder(double sigma_start, double sigma_end, int steps, double rho);

/// sigma_start * (sigma_end / sigma_start)^(i/n) for i = 0..n.
std::vector<double> geometric_ladder(double sigma_start, double sigma_end, int steps);

IntegratorResult euler_maruyama(const IntegratorRun& run, int steps, const ScoreFn& score,
                                const VESchedule& sched, Rng& rng);

IntegratorResult reverse_diffusion(const IntegratorRun& run, int steps, const ScoreFn& score,
                                   const VESchedule& sched, Rng& rng);

IntegratorResult prob_flow_euler(const IntegratorRun& run, int steps, const ScoreFn& score,
                                 const VESchedule& sched);

/// Dormand-Prince 5(4). Rejected steps count toward nfe.
IntegratorResult rk45(const IntegratorRun& run, const ScoreFn& score, const VESchedule& sched,
                      double rtol, double atol);

/// Heun on the rho-warped ladder; the last interval is a plain Euler step, so
/// nfe = 2 * steps - 1.
IntegratorResult karras_det(const IntegratorRun& run, int steps, const ScoreFn& score,
                            const VESchedule& sched, double rho);

/// karras_det with per-step churn: sigma_hat = sigma_i (1 + gamma),
/// gamma = min(churn / steps, sqrt(2) - 1), noise variance (sigma_hat^2 - sigma_i^2) s_noise^2.
IntegratorResult karras_stoch(const IntegratorRun& run, int steps, const ScoreFn& score,
                              const VESchedule& sched, double rho, double churn, double s_noise,
                              Rng& rng);

/// Dispatches on spec.kind.
IntegratorResult integrate(const IntegratorSpec& spec, const IntegratorRun& run, const ScoreFn& score,
                           const VESchedule& sched, Rng& rng);

}  // namespace dmcmc
