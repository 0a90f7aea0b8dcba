#include "dmcmc/integrators.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace dmcmc {

namespace {

void validate(const IntegratorRun& run, const VESchedule& sched) {
  if (!run.x0.allFinite()) throw std::invalid_argument("integrator: non-finite start point");
  if (!(run.sigma_end >= sched.sigma_min()))
    throw std::domain_error("integrator: sigma_end below sigma_min");
  if (!(run.sigma_start <= sched.sigma_max()))
    throw std::domain_error("integrator: sigma_start above sigma_max");
  if (!(run.sigma_start >= run.sigma_end))
    throw std::domain_error("integrator: sigma_start must be >= sigma_end");
}

void require_steps(int steps) {
  if (steps < 1) throw std::invalid_argument("integrator: steps must be >= 1");
}

void check_finite(const Vector& x, long step, const char* who) {
  if (!x.allFinite()) throw DivergenceError(std::string(who) + ": non-finite iterate", step);
}

// dx/dsigma for the probability-flow ODE.
Vector ode_field(const ScoreFn& score, const Vector& x, double sigma) { return -sigma * score(x, sigma); }

}  // namespace

std::string_view to_string(IntegratorKind kind) {
  switch (kind) {
    case IntegratorKind::kEulerMaruyama: return "euler_maruyama";
    case IntegratorKind::kReverseDiffusion: return "reverse_diffusion";
    case IntegratorKind::kProbFlowEuler: return "prob_flow_euler";
    case IntegratorKind::kRk45: return "rk45";
    case IntegratorKind::kKarrasDet: return "karras_det";
    case IntegratorKind::kKarrasStoch: return "karras_stoch";
  }
  return "unknown";
}

IntegratorKind integrator_from_string(std::string_view name) {
  for (auto k : all_integrators())
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown integrator '" + std::string(name) + "'");
}

bool is_stochastic(IntegratorKind kind) {
  return kind == IntegratorKind::kEulerMaruyama || kind == IntegratorKind::kReverseDiffusion ||
         kind == IntegratorKind::kKarrasStoch;
}

const std::vector<IntegratorKind>& all_integrators() {
  static const std::vector<IntegratorKind> kinds = {
      IntegratorKind::kEulerMaruyama, IntegratorKind::kReverseDiffusion, IntegratorKind::kProbFlowEuler,
      IntegratorKind::kRk45,          IntegratorKind::kKarrasDet,        IntegratorKind::kKarrasStoch};
  return kinds;
}

int steps_for_budget(IntegratorKind kind, int budget) {
  if (budget < 1) throw std::invalid_argument("steps_for_budget: budget must be >= 1");
  switch (kind) {
    case IntegratorKind::kKarrasDet:
    case IntegratorKind::kKarrasStoch: return (budget + 1) / 2;
    case IntegratorKind::kRk45: return 0;
    default: return budget;
  }
}

long nfe_for_steps(IntegratorKind kind, int steps) {
  switch (kind) {
    case IntegratorKind::kKarrasDet:
    case IntegratorKind::kKarrasStoch: return 2L * steps - 1;
    case IntegratorKind::kRk45: return -1;
    default: return steps;
  }
}

std::vector<double> karras_ladder(double sigma_start, double sigma_end, int steps, double rho) {
  require_steps(steps);
  if (!(rho > 0.0)) throw std::invalid_argument("karras_ladder: rho must be > 0");
  const double a = std::pow(sigma_start, 1.0 / rho);
  const double b = std::pow(sigma_end, 1.0 / rho);
  std::vector<double> ladder(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i)
    ladder[static_cast<std::size_t>(i)] = std::pow(a + (static_cast<double>(i) / steps) * (b - a), rho);
  ladder.front() = sigma_start;
  ladder.back() = sigma_end;
  return ladder;
}

std::vector<double> geometric_ladder(double sigma_start, double sigma_end, int steps) {
  require_steps(steps);
  std::vector<double> ladder(static_cast<std::size_t>(steps) + 1);
  const double log_ratio = std::log(sigma_end / sigma_start);
  for (int i = 0; i <= steps; ++i)
    ladder[static_cast<std::size_t>(i)] = sigma_start * std::exp(log_ratio * i / steps);
  ladder.front() = sigma_start;
  ladder.back() = sigma_end;
  return ladder;
}

IntegratorResult euler_maruyama(const IntegratorRun& run, int steps, const ScoreFn& score,
                                const VESchedule& sched, Rng& rng) {
  validate(run, sched);
  require_steps(steps);
  IntegratorResult res{run.x0, 0, 0};
  if (run.sigma_start == run.sigma_end) return res;

  Vector& x = res.x_final;
  Vector eps(x.size());
  const double dsigma = (run.sigma_end - run.sigma_start) / steps;
  for (int i = 0; i < steps; ++i) {
    const double sigma = run.sigma_start + i * dsigma;
    const double t = sched.t_of_sigma(sigma);
    // dt = dsigma / sigma_dot(t), negative in reverse time.
    const double dt = dsigma / sched.sigma_dot(t);
    const auto field = reverse_drift(score, x, t, sched, ReverseMode::kSde);
    ++res.nfe;
    fill_normal(rng, eps);
    x += field.drift * dt + (field.diffusion * std::sqrt(std::abs(dt))) * eps;
    check_finite(x, i, "euler_maruyama");
    ++res.steps;
  }
  return res;
}

IntegratorResult reverse_diffusion(const IntegratorRun& run, int steps, const ScoreFn& score,
                                   const VESchedule& sched, Rng& rng) {
  validate(run, sched);
  require_steps(steps);
  IntegratorResult res{run.x0, 0, 0};
  if (run.sigma_start == run.sigma_end) return res;

  const auto ladder = geometric_ladder(run.sigma_start, run.sigma_end, steps);
  Vector& x = res.x_final;
  Vector eps(x.size());
  for (int i = 0; i < steps; ++i) {
    const double hi = ladder[static_cast<std::size_t>(i)];
    const double lo = ladder[static_cast<std::size_t>(i) + 1];
    const double var = hi * hi - lo * lo;
    const Vector s = score(x, hi);
    ++res.nfe;
    fill_normal(rng, eps);
    x += var * s + std::sqrt(var) * eps;
    check_finite(x, i, "reverse_diffusion");
    ++res.steps;
  }
  return res;
}

IntegratorResult prob_flow_euler(const IntegratorRun& run, int steps, const ScoreFn& score,
                                 const VESchedule& sched) {
  validate(run, sched);
  require_steps(steps);
  IntegratorResult res{run.x0, 0, 0};
  if (run.sigma_start == run.sigma_end) return res;

  Vector& x = res.x_final;
  const double dsigma = (run.sigma_end - run.sigma_start) / steps;
  for (int i = 0; i < steps; ++i) {
    const double sigma = run.sigma_start + i * dsigma;
    x += dsigma * ode_field(score, x, sigma);
    ++res.nfe;
    check_finite(x, i, "prob_flow_euler");
    ++res.steps;
  }
  return res;
}

IntegratorResult rk45(const IntegratorRun& run, const ScoreFn& score, const VESchedule& sched, double rtol,
                      double atol) {
  validate(run, sched);
  if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("rk45: tolerances must be > 0");
  IntegratorResult res{run.x0, 0, 0};
  if (run.sigma_start == run.sigma_end) return res;

  // Dormand-Prince 5(4) tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // Error weights: b - b_hat.
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double kSafety = 0.9, kMinFactor = 0.2, kMaxFactor = 10.0;
  constexpr long kMaxRejections = 100000;

  auto f = [&](double sigma, const Vector& y) {
    ++res.nfe;
    return ode_field(score, y, sigma);
  };
  auto err_norm = [&](const Vector& y0, const Vector& y1, const Vector& e) {
    const Eigen::ArrayXd scale = atol + rtol * y0.array().abs().max(y1.array().abs());
    return std::sqrt((e.array() / scale).square().mean());
  };

  Vector& x = res.x_final;
  double sigma = run.sigma_start;
  const double span = run.sigma_end - run.sigma_start;  // negative
  Vector k1 = f(sigma, x);

  // Initial step from the usual derivative-scaled guess.
  double h;
  {
    const Eigen::ArrayXd scale = atol + rtol * x.array().abs();
    const double d0 = std::sqrt((x.array() / scale).square().mean());
    const double d1 = std::sqrt((k1.array() / scale).square().mean());
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, std::abs(span));
    h = -h;
  }

  long rejections = 0;
  while (sigma > run.sigma_end) {
    const bool last = sigma + h <= run.sigma_end;
    if (last) h = run.sigma_end - sigma;
    const double sigma_next = last ? run.sigma_end : sigma + h;
    const Vector k2 = f(sigma + c2 * h, x + h * (a21 * k1));
    const Vector k3 = f(sigma + c3 * h, x + h * (a31 * k1 + a32 * k2));
    const Vector k4 = f(sigma + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(sigma + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 = f(sigma_next, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vector x_new = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = f(sigma_next, x_new);
    const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = err_norm(x, x_new, err);

    if (!std::isfinite(en)) throw DivergenceError("rk45: non-finite error estimate", res.steps);
    double factor = en == 0.0 ? kMaxFactor : kSafety * std::pow(en, -0.2);
    factor = std::clamp(factor, kMinFactor, kMaxFactor);
    if (en <= 1.0) {
      x = std::move(x_new);
      k1 = k7;
      sigma = sigma_next;
      ++res.steps;
      rejections = 0;
      h *= factor;
    } else {
      if (++rejections > kMaxRejections) throw StalledSolverError("rk45: too many consecutive rejections");
      h *= std::min(1.0, factor);
    }
    if (std::abs(h) < 1e-14 * std::max(1.0, sigma))
      throw StalledSolverError("rk45: step size underflow");
  }
  return res;
}

namespace {

// Shared Heun loop; churn_noise is invoked only when gamma > 0.
template <class Churn>
IntegratorResult karras_loop(const IntegratorRun& run, int steps, const ScoreFn& score, double rho,
                             double gamma, Churn&& churn_noise, const char* who) {
  IntegratorResult res{run.x0, 0, 0};
  if (run.sigma_start == run.sigma_end) return res;
  const auto ladder = karras_ladder(run.sigma_start, run.sigma_end, steps, rho);
  Vector& x = res.x_final;
  for (int i = 0; i < steps; ++i) {
    const double sigma = ladder[static_cast<std::size_t>(i)];
    const double next = ladder[static_cast<std::size_t>(i) + 1];
    double sigma_hat = sigma;
    if (gamma > 0.0) {
      sigma_hat = sigma * (1.0 + gamma);
      churn_noise(x, sigma_hat * sigma_hat - sigma * sigma);
    }
    const Vector d = ode_field(score, x, sigma_hat);
    ++res.nfe;
    const double h = next - sigma_hat;
    Vector x_euler = x + h * d;
    if (i + 1 < steps) {
      const Vector d2 = ode_field(score, x_euler, next);
      ++res.nfe;
      x += (0.5 * h) * (d + d2);
    } else {
      x = std::move(x_euler);
    }
    check_finite(x, i, who);
    ++res.steps;
  }
  return res;
}

}  // namespace

IntegratorResult karras_det(const IntegratorRun& run, int steps, const ScoreFn& score,
                            const VESchedule& sched, double rho) {
  validate(run, sched);
  require_steps(steps);
  return karras_loop(run, steps, score, rho, 0.0, [](Vector&, double) {}, "karras_det");
}

IntegratorResult karras_stoch(const IntegratorRun& run, int steps, const ScoreFn& score,
                              const VESchedule& sched, double rho, double churn, double s_noise, Rng& rng) {
  validate(run, sched);
  require_steps(steps);
  if (!(churn >= 0.0) || !(s_noise >= 0.0))
    throw std::invalid_argument("karras_stoch: churn and s_noise must be >= 0");
  const double gamma = std::min(churn / steps, std::sqrt(2.0) - 1.0);
  Vector eps(run.x0.size());
  auto add_noise = [&](Vector& x, double var) {
    fill_normal(rng, eps);
    x += (std::sqrt(var) * s_noise) * eps;
  };
  return karras_loop(run, steps, score, rho, gamma, add_noise, "karras_stoch");
}

IntegratorResult integrate(const IntegratorSpec& spec, const IntegratorRun& run, const ScoreFn& score,
                           const VESchedule& sched, Rng& rng) {
  switch (spec.kind) {
    case IntegratorKind::kEulerMaruyama: return euler_maruyama(run, spec.steps, score, sched, rng);
    case IntegratorKind::kReverseDiffusion: return reverse_diffusion(run, spec.steps, score, sched, rng);
    case IntegratorKind::kProbFlowEuler: return prob_flow_euler(run, spec.steps, score, sched);
    case IntegratorKind::kRk45: return rk45(run, score, sched, spec.rtol, spec.atol);
    case IntegratorKind::kKarrasDet: return karras_det(run, spec.steps, score, sched, spec.rho);
    case IntegratorKind::kKarrasStoch:
      return karras_stoch(run, spec.steps, score, sched, spec.rho, spec.churn, spec.s_noise, rng);
  }
  throw std::logic_error("integrate: unhandled integrator");
}

}  // namespace dmcmc
