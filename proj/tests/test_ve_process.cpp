#include "dmcmc/mixture.hpp"
#include "dmcmc/ve_process.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace dmcmc;

TEST_CASE("noise grid endpoints, monotonicity and prior") {
  const NoiseGrid grid(0.01, 50.0, 1000);
  CHECK(grid.size() == 1000);
  CHECK(grid.level(0) == 0.01);
  CHECK(grid.level(999) == 50.0);
  for (int m = 1; m < grid.size(); ++m) CHECK(grid.level(m) > grid.level(m - 1));
  const double total = std::accumulate(grid.prior().begin(), grid.prior().end(), 0.0);
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK(grid.prior()[0] / grid.prior()[999] == doctest::Approx(5000.0).epsilon(1e-10));
  CHECK(grid.nearest_index(grid.level(417)) == 417);
}

TEST_CASE("noise grid rejects bad ranges") {
  CHECK_THROWS_AS(NoiseGrid(0.0, 1.0, 10), std::domain_error);
  CHECK_THROWS_AS(NoiseGrid(1.0, 1.0, 10), std::domain_error);
  CHECK_THROWS_AS(NoiseGrid(0.1, 1.0, 0), std::domain_error);
  const NoiseGrid single(0.1, 1.0, 1);
  CHECK(single.size() == 1);
  CHECK(single.prior()[0] == 1.0);
}

TEST_CASE("schedule endpoints, midpoint and inverse") {
  const VESchedule sched(0.01, 50.0);
  CHECK(sched.sigma_of_t(0.0) == 0.01);
  CHECK(sched.sigma_of_t(1.0) == 50.0);
  CHECK(sched.sigma_of_t(0.5) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double t = u(rng);
    CHECK(std::abs(sched.t_of_sigma(sched.sigma_of_t(t)) - t) < 1e-12);
  }
  CHECK_THROWS_AS(sched.sigma_of_t(1.5), std::domain_error);
  CHECK_THROWS_AS(sched.sigma_of_t(-0.1), std::domain_error);
  CHECK_THROWS_AS(sched.t_of_sigma(0.001), std::domain_error);
  CHECK_THROWS_AS(sched.t_of_sigma(60.0), std::domain_error);
}

TEST_CASE("g squared matches finite differences of sigma squared") {
  const VESchedule sched(0.01, 50.0);
  for (double t : {0.05, 0.3, 0.5, 0.77, 0.95}) {
    const double h = 1e-5;
    const double sp = sched.sigma_of_t(t + h), sm = sched.sigma_of_t(t - h);
    const double fd = (sp * sp - sm * sm) / (2 * h);
    CHECK(std::abs(fd - sched.g2(t)) <= 1e-6 * sched.g2(t));
    const double fd_dot = (sp - sm) / (2 * h);
    CHECK(std::abs(fd_dot - sched.sigma_dot(t)) <= 1e-6 * sched.sigma_dot(t));
  }
}

TEST_CASE("ODE drift is half the SDE drift and vanishes with the score") {
  const VESchedule sched(0.01, 50.0);
  GaussianMixture mix(3, {{Vector::Ones(3), 0.0, 1.0}, {-Vector::Ones(3), 0.2, 2.0}});
  const ScoreFn score = make_score_fn(mix);
  Rng rng(2);
  for (double t : {0.1, 0.5, 1.0}) {
    const Vector x = normal_vector(rng, 3);
    const auto sde = reverse_drift(score, x, t, sched, ReverseMode::kSde);
    const auto ode = reverse_drift(score, x, t, sched, ReverseMode::kOde);
    CHECK((ode.drift - 0.5 * sde.drift).norm() < 1e-14 * sde.drift.norm());
    CHECK(ode.diffusion == 0.0);
    CHECK(sde.diffusion == doctest::Approx(std::sqrt(sched.g2(t))));
  }
  const ScoreFn zero = [](const Vector& x, double) -> Vector { return Vector::Zero(x.size()); };
  CHECK(reverse_drift(zero, Vector::Ones(3), 0.4, sched, ReverseMode::kSde).drift.norm() == 0.0);
  CHECK_THROWS_AS(reverse_drift(zero, Vector::Ones(3), 0.0, sched, ReverseMode::kOde), std::domain_error);
}

TEST_CASE("ODE drift agrees with the derivative of the closed-form flow") {
  const VESchedule sched(0.01, 50.0);
  const double s = 1.3, t = 0.4, h = 1e-6;
  const Vector x = (Vector(2) << 0.7, -1.1).finished();
  const auto ode = reverse_drift(gaussian_score(s), x, t, sched, ReverseMode::kOde);
  const double sig = sched.sigma_of_t(t);
  const Vector fwd = (gaussian_ode_solution(s, x, sig, sched.sigma_of_t(t + h)) -
                      gaussian_ode_solution(s, x, sig, sched.sigma_of_t(t - h))) /
                     (2 * h);
  CHECK((ode.drift - fwd).norm() < 1e-7 * fwd.norm());
  const Vector analytic = 0.5 * sched.g2(t) * x / (s * s + sig * sig);
  CHECK((ode.drift - analytic).norm() < 1e-12 * analytic.norm());
}

TEST_CASE("closed-form Gaussian flow examples") {
  const Vector x0 = (Vector(2) << 2.0, 0.0).finished();
  CHECK(gaussian_ode_solution(1.0, x0, 0.7, 0.7) == x0);
  CHECK((gaussian_ode_solution(0.0, x0, 2.0, 0.5) - x0 * 0.25).norm() < 1e-15);
  const Vector r = gaussian_ode_solution(1.0, x0, 1.0, 0.1);
  CHECK(r[0] == doctest::Approx(2.0 * std::sqrt(1.01 / 2.0)).epsilon(1e-14));
  CHECK(r[0] == doctest::Approx(1.4213).epsilon(1e-4));
  CHECK(r[1] == 0.0);
}

TEST_CASE("closed-form flow transports marginals") {
  const double s = 1.0, sa = 3.0, sb = 0.4;
  Rng rng(3);
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vector x = std::sqrt(s * s + sa * sa) * normal_vector(rng, 1);
    const double y = gaussian_ode_solution(s, x, sa, sb)[0];
    sum += y;
    sum2 += y * y;
  }
  const double var_b = s * s + sb * sb;
  const double mean = sum / n, second = sum2 / n;
  CHECK(std::abs(mean) < 3.0 * std::sqrt(var_b / n));
  CHECK(std::abs(second - var_b) < 3.0 * var_b * std::sqrt(2.0 / n));
}

TEST_CASE("tweedie denoising") {
  const double s = 1.5, sigma = 0.8;
  const Vector x = (Vector(3) << 1.0, -2.0, 0.5).finished();
  const Vector g = tweedie_denoise(gaussian_score(s), x, sigma);
  CHECK((g - x * (s * s / (s * s + sigma * sigma))).norm() < 1e-14);

  const auto mix = make_benchmark_mixture({});
  Rng rng(4);
  const Vector near = Vector(mix.mean(5)) + 0.01 * normal_vector(rng, mix.dim());
  CHECK((tweedie_denoise(make_score_fn(mix), near, 0.01) - mix.mean(5)).norm() < 1e-6);

  const ScoreFn zero = [](const Vector& v, double) -> Vector { return Vector::Zero(v.size()); };
  CHECK(tweedie_denoise(zero, x, 0.3) == x);
  CHECK_THROWS_AS(tweedie_denoise(zero, x, 0.0), std::domain_error);
}
