#include "dmcmc/integrators.hpp"
#include "dmcmc/mixture.hpp"

#include <doctest.h>

#include <cmath>

using namespace dmcmc;

namespace {

const VESchedule kSched(0.01, 50.0);

ScoreFn zero_score() {
  return [](const Vector& x, double) -> Vector { return Vector::Zero(x.size()); };
}

double rel_error(const Vector& got, const Vector& want) { return (got - want).norm() / want.norm(); }

double slope(const std::vector<int>& steps, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double x = std::log(static_cast<double>(steps[i])), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double sample_variance(const Vector& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("integrator names round trip") {
  for (auto k : all_integrators()) CHECK(integrator_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(integrator_from_string("leapfrog"), std::invalid_argument);
  CHECK(is_stochastic(IntegratorKind::kEulerMaruyama));
  CHECK(is_stochastic(IntegratorKind::kKarrasStoch));
  CHECK_FALSE(is_stochastic(IntegratorKind::kKarrasDet));
}

TEST_CASE("budget to steps mapping") {
  CHECK(steps_for_budget(IntegratorKind::kKarrasDet, 9) == 5);
  CHECK(nfe_for_steps(IntegratorKind::kKarrasDet, 5) == 9);
  CHECK(steps_for_budget(IntegratorKind::kKarrasDet, 10) == 5);
  CHECK(steps_for_budget(IntegratorKind::kEulerMaruyama, 7) == 7);
  CHECK(steps_for_budget(IntegratorKind::kRk45, 7) == 0);
  CHECK_THROWS_AS(steps_for_budget(IntegratorKind::kProbFlowEuler, 0), std::invalid_argument);
}

TEST_CASE("ladders") {
  const auto uniform = karras_ladder(2.0, 1.0, 4, 1.0);
  for (int i = 0; i <= 4; ++i) CHECK(uniform[static_cast<std::size_t>(i)] == doctest::Approx(2.0 - 0.25 * i));
  const auto warped = karras_ladder(50.0, 0.01, 10, 7.0);
  CHECK(warped.front() == 50.0);
  CHECK(warped.back() == 0.01);
  for (std::size_t i = 1; i < warped.size(); ++i) CHECK(warped[i] < warped[i - 1]);
  const auto geo = geometric_ladder(8.0, 1.0, 3);
  CHECK(geo[1] == doctest::Approx(4.0));
  CHECK(geo[2] == doctest::Approx(2.0));
}

TEST_CASE("zero-length intervals return the start point without evaluations") {
  Rng rng(1);
  const Vector x0 = Vector::Ones(3);
  const IntegratorRun run{x0, 0.5, 0.5};
  for (auto k : all_integrators()) {
    IntegratorSpec spec;
    spec.kind = k;
    const auto r = integrate(spec, run, gaussian_score(1.0), kSched, rng);
    CHECK(r.x_final == x0);
    CHECK(r.nfe == 0);
  }
}

TEST_CASE("zero score leaves deterministic integrators at rest") {
  Rng rng(1);
  const Vector x0 = Vector::LinSpaced(4, -1.0, 2.0);
  const IntegratorRun run{x0, 5.0, 0.1};
  CHECK(prob_flow_euler(run, 20, zero_score(), kSched).x_final == x0);
  CHECK(karras_det(run, 20, zero_score(), kSched, 7.0).x_final == x0);
  CHECK(rk45(run, zero_score(), kSched, 1e-5, 1e-5).x_final == x0);
}

TEST_CASE("reported NFE equals the instrumented call count") {
  const auto mix = make_benchmark_mixture({});
  Rng rng(2);
  const Vector x0 = sample_smoothed(mix, 5.0, rng);
  const IntegratorRun run{x0, 5.0, 0.01};
  for (auto k : all_integrators()) {
    for (int budget : {1, 2, 9, 16}) {
      std::atomic<long> calls{0};
      IntegratorSpec spec;
      spec.kind = k;
      spec.churn = 5.0;
      spec.steps = steps_for_budget(k, std::max(budget, 1));
      const auto r = integrate(spec, run, counted(make_score_fn(mix), calls), kSched, rng);
      CHECK(r.nfe == calls.load());
      if (k != IntegratorKind::kRk45) {
        CHECK(r.nfe == nfe_for_steps(k, spec.steps));
        CHECK(r.nfe <= budget);
      }
    }
  }
}

TEST_CASE("prob-flow Euler accuracy and first order") {
  const Vector x0 = Vector::LinSpaced(8, -2.0, 3.0);
  const IntegratorRun run{x0, 1.0, 0.5};
  const Vector exact = gaussian_ode_solution(1.0, x0, 1.0, 0.5);
  CHECK(rel_error(prob_flow_euler(run, 1000, gaussian_score(1.0), kSched).x_final, exact) < 1e-3);
  const std::vector<int> steps = {32, 64, 128, 256, 512};
  std::vector<double> err;
  for (int n : steps) err.push_back(rel_error(prob_flow_euler(run, n, gaussian_score(1.0), kSched).x_final, exact));
  CHECK(slope(steps, err) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("karras_det second order, rho identity and exact NFE") {
  const Vector x0 = Vector::LinSpaced(8, -2.0, 3.0);
  const IntegratorRun run{x0, 1.0, 0.5};
  const Vector exact = gaussian_ode_solution(1.0, x0, 1.0, 0.5);
  const std::vector<int> steps = {16, 32, 64, 128, 256};
  std::vector<double> err;
  for (int n : steps) {
    const auto r = karras_det(run, n, gaussian_score(1.0), kSched, 7.0);
    CHECK(r.nfe == 2L * n - 1);
    err.push_back(rel_error(r.x_final, exact));
  }
  CHECK(std::abs(slope(steps, err) - 2.0) <= 0.3);
}

TEST_CASE("rk45 meets its tolerance and tightening helps") {
  const Vector x0 = Vector::LinSpaced(8, -2.0, 3.0);
  const IntegratorRun run{x0, 50.0, 0.01};
  const Vector exact = gaussian_ode_solution(1.0, x0, 50.0, 0.01);
  const auto tight = rk45(run, gaussian_score(1.0), kSched, 1e-5, 1e-5);
  CHECK(rel_error(tight.x_final, exact) < 1e-4);
  const auto loose = rk45(run, gaussian_score(1.0), kSched, 1e-3, 1e-3);
  const auto tighter = rk45(run, gaussian_score(1.0), kSched, 1e-5, 1e-3 * 1e-2);
  CHECK(rel_error(tighter.x_final, exact) * 10.0 <= rel_error(loose.x_final, exact));
  const auto euler = prob_flow_euler(run, 256, gaussian_score(1.0), kSched);
  CHECK(tight.nfe < euler.nfe);
  CHECK(rel_error(tight.x_final, exact) < rel_error(euler.x_final, exact));
  CHECK_THROWS_AS(rk45(run, gaussian_score(1.0), kSched, 0.0, 1e-5), std::invalid_argument);
}

TEST_CASE("deterministic integrators are bitwise repeatable") {
  const auto mix = make_benchmark_mixture({});
  Rng rng(3);
  const Vector x0 = sample_smoothed(mix, 10.0, rng);
  const IntegratorRun run{x0, 10.0, 0.01};
  const auto s = make_score_fn(mix);
  CHECK(karras_det(run, 12, s, kSched, 7.0).x_final == karras_det(run, 12, s, kSched, 7.0).x_final);
  CHECK(prob_flow_euler(run, 30, s, kSched).x_final == prob_flow_euler(run, 30, s, kSched).x_final);
  CHECK(rk45(run, s, kSched, 1e-4, 1e-4).x_final == rk45(run, s, kSched, 1e-4, 1e-4).x_final);
}

TEST_CASE("stochastic integrators reproduce the terminal marginal variance") {
  const int dim = 10000;
  const double s = 1.0, end = 0.01;
  Rng rng(4);
  const Vector x0 = std::sqrt(s * s + 50.0 * 50.0) * normal_vector(rng, dim);
  const IntegratorRun run{x0, 50.0, end};
  const double want = s * s + end * end;
  CHECK(sample_variance(euler_maruyama(run, 100, gaussian_score(s), kSched, rng).x_final) ==
        doctest::Approx(want).epsilon(0.1));
  CHECK(sample_variance(reverse_diffusion(run, 100, gaussian_score(s), kSched, rng).x_final) ==
        doctest::Approx(want).epsilon(0.1));
  CHECK(sample_variance(karras_stoch(run, 50, gaussian_score(s), kSched, 7.0, 10.0, 1.0, rng).x_final) ==
        doctest::Approx(want).epsilon(0.1));
}

TEST_CASE("reverse diffusion injects exactly the level variance") {
  const Vector x0 = Vector::Zero(5);
  Rng rng(5), copy = rng;
  const auto r = reverse_diffusion({x0, 2.0, 1.0}, 1, zero_score(), kSched, rng);
  const Vector eps = normal_vector(copy, 5);
  CHECK((r.x_final - std::sqrt(4.0 - 1.0) * eps).norm() < 1e-15);
}

TEST_CASE("karras_stoch churn noise and degenerate churn") {
  const Vector x0 = Vector::Zero(5);
  Rng rng(6), copy = rng;
  const int steps = 1;
  const double churn = 0.3;
  const auto r = karras_stoch({x0, 2.0, 1.0}, steps, zero_score(), kSched, 7.0, churn, 1.0, rng);
  const double hat = 2.0 * (1.0 + churn / steps);
  const Vector eps = normal_vector(copy, 5);
  CHECK((r.x_final - std::sqrt(hat * hat - 4.0) * eps).norm() < 1e-14);

  const auto mix = make_benchmark_mixture({});
  Rng start(7);
  const Vector x1 = sample_smoothed(mix, 3.0, start);
  const IntegratorRun run{x1, 3.0, 0.01};
  Rng unused(8);
  const auto a = karras_stoch(run, 9, make_score_fn(mix), kSched, 7.0, 0.0, 1.0, unused);
  const auto b = karras_det(run, 9, make_score_fn(mix), kSched, 7.0);
  CHECK(a.x_final == b.x_final);
  CHECK(a.nfe == b.nfe);
}

TEST_CASE("shorter intervals have less truncation error at equal budget") {
  const int dim = 100000;
  const double s = 1.0;
  for (auto k : {IntegratorKind::kEulerMaruyama, IntegratorKind::kReverseDiffusion, IntegratorKind::kProbFlowEuler,
                 IntegratorKind::kKarrasDet}) {
    for (int nfe : {8, 16, 32, 64}) {
      double err[2];
      int i = 0;
      for (double start : {0.5, 50.0}) {
        Rng rng(seed_for(9, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(nfe)));
        IntegratorSpec spec;
        spec.kind = k;
        spec.steps = steps_for_budget(k, nfe);
        const Vector x0 = std::sqrt(s * s + start * start) * normal_vector(rng, dim);
        const auto r = integrate(spec, {x0, start, 0.01}, gaussian_score(s), kSched, rng);
        err[i++] = is_stochastic(k) ? std::abs(sample_variance(r.x_final) / (s * s + 1e-4) - 1.0)
                                    : rel_error(r.x_final, gaussian_ode_solution(s, x0, start, 0.01));
      }
      INFO(to_string(k), " nfe=", nfe);
      CHECK(err[0] < err[1]);
    }
  }
}

TEST_CASE("invalid runs are rejected and divergence is reported") {
  Rng rng(1);
  const Vector x0 = Vector::Ones(2);
  CHECK_THROWS_AS(prob_flow_euler({x0, 60.0, 0.5}, 4, zero_score(), kSched), std::domain_error);
  CHECK_THROWS_AS(prob_flow_euler({x0, 1.0, 0.001}, 4, zero_score(), kSched), std::domain_error);
  CHECK_THROWS_AS(prob_flow_euler({x0, 0.5, 1.0}, 4, zero_score(), kSched), std::domain_error);
  CHECK_THROWS_AS(prob_flow_euler({x0, 1.0, 0.5}, 0, zero_score(), kSched), std::invalid_argument);
  const ScoreFn bad = [](const Vector& x, double) -> Vector { return Vector::Constant(x.size(), NAN); };
  CHECK_THROWS_AS(prob_flow_euler({x0, 1.0, 0.5}, 4, bad, kSched), DivergenceError);
  CHECK_THROWS_AS(karras_det({x0, 1.0, 0.5}, 4, bad, kSched, 7.0), DivergenceError);
  CHECK_THROWS_AS(reverse_diffusion({x0, 1.0, 0.5}, 4, bad, kSched, rng), DivergenceError);
}
