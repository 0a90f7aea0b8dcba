#include "dmcmc/mixture.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace dmcmc;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

GaussianMixture two_mode_plane(double w0 = 1.0, double w1 = 1.0) {
  return GaussianMixture(2, {{vec({-3.0, 0.0}), 0.0, w0}, {vec({3.0, 0.0}), 0.0, w1}});
}

double log_normal_iso(const Vector& x, const Vector& mu, double var) {
  const double d = static_cast<double>(x.size());
  return -0.5 * (x - mu).squaredNorm() / var - 0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

GaussianMixture random_mixture(Rng& rng, int dim, int k) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  std::vector<MixtureMode> modes;
  for (int i = 0; i < k; ++i) modes.push_back({2.0 * normal_vector(rng, dim), u(rng) - 0.2, u(rng)});
  return GaussianMixture(dim, modes);
}

}  // namespace

TEST_CASE("single mode score and log density") {
  GaussianMixture mix(2, {{vec({0.0, 0.0}), 0.0, 1.0}});
  const auto e = smoothed_score(mix, vec({2.0, 0.0}), 1.0);
  CHECK(e.score[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(e.score[1] == doctest::Approx(0.0));
  CHECK(e.log_density == doctest::Approx(log_normal_iso(vec({2.0, 0.0}), vec({0.0, 0.0}), 1.0)).epsilon(1e-14));
}

TEST_CASE("symmetric pair has zero score at the midpoint and matches direct summation") {
  const auto mix = two_mode_plane();
  const auto e = smoothed_score(mix, vec({0.0, 0.0}), 1.0);
  CHECK(std::abs(e.score[0]) < 1e-15);
  CHECK(std::abs(e.score[1]) < 1e-15);
  const double direct = std::log(0.5 * std::exp(log_normal_iso(vec({0, 0}), vec({-3, 0}), 1.0)) +
                                 0.5 * std::exp(log_normal_iso(vec({0, 0}), vec({3, 0}), 1.0)));
  CHECK(e.log_density == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("responsibilities are one-hot at an isolated mode and always normalized") {
  const auto mix = make_benchmark_mixture({});
  for (int k : {0, 7, 49}) {
    const auto e = smoothed_score(mix, Vector(mix.mean(k)), 0.05);
    CHECK(e.responsibilities[k] > 1.0 - 1e-6);
    CHECK(std::abs(e.responsibilities.sum() - 1.0) < 1e-10);
    CHECK((e.responsibilities.array() >= 0.0).all());
  }
}

TEST_CASE("score matches central finite differences of the log density") {
  Rng rng(11);
  std::uniform_real_distribution<double> logsig(std::log(0.05), std::log(5.0));
  for (int trial = 0; trial < 50; ++trial) {
    const auto mix = random_mixture(rng, 1 + trial % 16, 1 + trial % 6);
    const Vector x = normal_vector(rng, mix.dim()) * 1.5;
    const double sigma = std::exp(logsig(rng));
    const Vector s = smoothed_score(mix, x, sigma).score;
    const double h = 1e-4;
    Vector fd(mix.dim());
    for (int i = 0; i < mix.dim(); ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (smoothed_score(mix, xp, sigma).log_density - smoothed_score(mix, xm, sigma).log_density) / (2 * h);
    }
    CHECK((fd - s).norm() <= 1e-5 * std::max(1.0, s.norm()));
  }
}

TEST_CASE("score-only fast path equals the full evaluation") {
  Rng rng(3);
  const auto mix = random_mixture(rng, 5, 4);
  for (int t = 0; t < 20; ++t) {
    const Vector x = normal_vector(rng, 5);
    CHECK((mixture_score(mix, x, 0.7) - smoothed_score(mix, x, 0.7).score).norm() < 1e-12);
  }
}

TEST_CASE("smoothing semigroup") {
  Rng rng(5);
  const auto mix = random_mixture(rng, 4, 3);
  const double sa = 0.8, sb = 1.3;
  const auto wider = mix.with_added_variance(sa * sa);
  for (int t = 0; t < 10; ++t) {
    const Vector x = normal_vector(rng, 4);
    const auto a = smoothed_score(wider, x, sb);
    const auto b = smoothed_score(mix, x, std::hypot(sa, sb));
    CHECK(a.log_density == doctest::Approx(b.log_density).epsilon(1e-12));
    CHECK((a.score - b.score).norm() < 1e-12);
  }
}

TEST_CASE("permuting modes changes no output") {
  Rng rng(9);
  const auto mix = random_mixture(rng, 3, 5);
  const auto perm = mix.permuted({3, 0, 4, 1, 2});
  for (int t = 0; t < 10; ++t) {
    const Vector x = normal_vector(rng, 3);
    const auto a = smoothed_score(mix, x, 0.6);
    const auto b = smoothed_score(perm, x, 0.6);
    CHECK(std::abs(a.log_density - b.log_density) < 1e-12);
    CHECK((a.score - b.score).norm() < 1e-12);
  }
}

TEST_CASE("invalid inputs are rejected") {
  const auto mix = two_mode_plane();
  CHECK_THROWS_AS(smoothed_score(mix, vec({NAN, 0.0}), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(smoothed_score(mix, vec({0.0, 0.0}), NAN), std::invalid_argument);
  CHECK_THROWS_AS(smoothed_score(mix, vec({0.0, 0.0}), 0.0), std::domain_error);
  CHECK_THROWS_AS(smoothed_score(mix, vec({0.0, 0.0}), -1.0), std::domain_error);
  CHECK_THROWS_AS(smoothed_score(mix, vec({0.0}), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(2, {}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(2, {{vec({0.0, 0.0}), -1.0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(2, {{vec({0.0, 0.0}), 0.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(GaussianMixture(2, {{vec({0.0}), 0.0, 1.0}}), std::invalid_argument);
}

TEST_CASE("point-mass draws at sigma zero are stored means") {
  const auto mix = two_mode_plane();
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vector x = sample_smoothed(mix, 0.0, rng);
    const bool at_mean = x == Vector(mix.mean(0)) || x == Vector(mix.mean(1));
    CHECK(at_mean);
  }
}

TEST_CASE("mode frequencies follow the weights") {
  const auto mix = two_mode_plane(0.3, 0.7);
  Rng rng(2);
  const int n = 100000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += sample_smoothed_labeled(mix, 0.0, rng).second == 0;
  const double se = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(first / static_cast<double>(n) - 0.3) < 3 * se);
}

TEST_CASE("smoothed draws around a single mode have a small mean") {
  GaussianMixture mix(2, {{vec({0.0, 0.0}), 0.0, 1.0}});
  Rng rng(4);
  Vector acc = Vector::Zero(2);
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += sample_smoothed(mix, 2.0, rng);
  CHECK((acc / n).norm() < 0.03);
}

TEST_CASE("sigma posterior is normalized, calibrated and peaks at sigma_min on a mode") {
  const auto mix = make_benchmark_mixture({.dim = 256, .modes = 50, .subspace_dim = 8, .min_separation = 20.0});
  const NoiseGrid grid(0.01, 50.0, 100);
  Rng rng(6);
  int hits = 0;
  const int trials = 1000;
  std::uniform_int_distribution<int> level(0, grid.size() - 1);
  std::uniform_int_distribution<int> mode(0, mix.num_modes() - 1);
  for (int t = 0; t < trials; ++t) {
    const int m = level(rng);
    const Vector x = Vector(mix.mean(mode(rng))) + grid.level(m) * normal_vector(rng, mix.dim());
    const Vector p = sigma_posterior(mix, x, grid);
    CHECK(std::abs(p.sum() - 1.0) < 1e-10);
    Eigen::Index best;
    p.maxCoeff(&best);
    hits += std::abs(static_cast<int>(best) - m) <= 2;
  }
  CHECK(hits >= 0.95 * trials);
  Eigen::Index best;
  sigma_posterior(mix, Vector(mix.mean(3)), grid).maxCoeff(&best);
  CHECK(best == 0);
}

TEST_CASE("mixed base variances take the general posterior path") {
  GaussianMixture mix(2, {{vec({0.0, 0.0}), 0.0, 1.0}, {vec({5.0, 0.0}), 0.5, 2.0}});
  const NoiseGrid grid(0.01, 10.0, 20);
  const Vector x = vec({1.0, 0.3});
  const Vector p = sigma_posterior(mix, x, grid);
  Vector brute(grid.size());
  for (int m = 0; m < grid.size(); ++m)
    brute[m] = std::exp(smoothed_score(mix, x, grid.level(m)).log_density + grid.log_prior()[m]);
  brute /= brute.sum();
  CHECK((p - brute).norm() < 1e-12);
}

TEST_CASE("cyclic benchmark geometry has the requested separation and equal neighbourhoods") {
  const auto mix = make_benchmark_mixture({});
  CHECK(mix.num_modes() == 50);
  CHECK(mix.dim() == 16);
  auto neighbourhood = [&](int k) {
    std::vector<double> d;
    for (int j = 0; j < mix.num_modes(); ++j)
      if (j != k) d.push_back((mix.mean(j) - mix.mean(k)).norm());
    std::sort(d.begin(), d.end());
    return d;
  };
  const auto ref = neighbourhood(0);
  CHECK(ref.front() == doctest::Approx(2.0).epsilon(1e-12));
  for (int k = 1; k < mix.num_modes(); ++k) {
    const auto other = neighbourhood(k);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(other[i] == doctest::Approx(ref[i]).epsilon(1e-9));
  }
  const Matrix basis = dct_basis(16);
  const Matrix high = basis.rightCols(8).transpose() * mix.means();
  CHECK(high.norm() < 1e-10);
}

TEST_CASE("random benchmark geometry respects min separation") {
  BenchmarkMixtureSpec spec;
  spec.geometry = BenchmarkGeometry::kRandom;
  spec.modes = 20;
  spec.min_separation = 1.0;
  const auto mix = make_benchmark_mixture(spec);
  for (int i = 0; i < mix.num_modes(); ++i)
    for (int j = i + 1; j < mix.num_modes(); ++j) CHECK((mix.mean(i) - mix.mean(j)).norm() >= 1.0);
}

TEST_CASE("benchmark spec validation") {
  BenchmarkMixtureSpec odd;
  odd.subspace_dim = 7;
  CHECK_THROWS_AS(make_benchmark_mixture(odd), std::invalid_argument);
  BenchmarkMixtureSpec zero_sep;
  zero_sep.min_separation = 0.0;
  CHECK_THROWS_AS(make_benchmark_mixture(zero_sep), std::invalid_argument);
  CHECK_THROWS_AS(benchmark_spec_from_json({{"geometry", "hexagonal"}}), std::invalid_argument);
}

TEST_CASE("DCT basis is orthonormal") {
  const Matrix b = dct_basis(12);
  CHECK((b.transpose() * b - Matrix::Identity(12, 12)).norm() < 1e-12);
}

TEST_CASE("mixture and spec JSON round trip") {
  GaussianMixture mix(2, {{vec({0.5, -1.0}), 0.25, 1.0}, {vec({3.0, 2.0}), 0.0, 3.0}});
  nlohmann::json j = mix;
  const auto back = mixture_from_json(j);
  CHECK(back.means() == mix.means());
  CHECK(back.weights() == mix.weights());
  CHECK(back.base_variances() == mix.base_variances());

  BenchmarkMixtureSpec spec;
  spec.geometry = BenchmarkGeometry::kRandom;
  spec.seed = 99;
  nlohmann::json js = spec;
  const auto spec2 = benchmark_spec_from_json(js);
  CHECK(spec2.geometry == BenchmarkGeometry::kRandom);
  CHECK(spec2.seed == 99);
  CHECK(make_benchmark_mixture(spec2).means() == make_benchmark_mixture(spec).means());
}
