#include "dmcmc/diagnostics.hpp"
#include "dmcmc/samplers.hpp"

#include <doctest.h>

#include <cmath>

using namespace dmcmc;

namespace {

class OneHot final : public NoiseLevelPredictor {
 public:
  OneHot(NoiseGrid grid, int index) : grid_(std::move(grid)), index_(index) {}
  Vector predict(const Vector&) const override {
    Vector p = Vector::Zero(grid_.size());
    p[index_] = 1.0;
    return p;
  }
  const NoiseGrid& grid() const override { return grid_; }

 private:
  NoiseGrid grid_;
  int index_;
};

class Broken final : public NoiseLevelPredictor {
 public:
  explicit Broken(NoiseGrid grid) : grid_(std::move(grid)) {}
  Vector predict(const Vector&) const override { return Vector::Constant(grid_.size(), 0.5); }
  const NoiseGrid& grid() const override { return grid_; }

 private:
  NoiseGrid grid_;
};

struct Bench {
  GaussianMixture mix = make_benchmark_mixture({});
  VESchedule sched{0.01, 50.0};
  ExactPosterior posterior{mix, NoiseGrid(0.01, 50.0, 1000)};
  ScoreFn score = make_score_fn(mix);
};

DLGConfig small_dlg(int n_skip, int n_den, int chains, int per_chain) {
  DLGConfig cfg;
  cfg.eta = 1.0;
  cfg.n_skip = n_skip;
  cfg.n_den = n_den;
  cfg.n_chains = chains;
  cfg.samples_per_chain = per_chain;
  return cfg;
}

IntegratorSpec karras() {
  IntegratorSpec spec;
  spec.kind = IntegratorKind::kKarrasDet;
  return spec;
}

}  // namespace

TEST_CASE("langevin step edge cases and accounting") {
  const NoiseGrid grid(0.01, 1.0, 10);
  const ScoreFn zero = [](const Vector& x, double) -> Vector { return Vector::Zero(x.size()); };
  ChainState st{Vector::LinSpaced(3, 0.0, 1.0), 4, 0, 7};
  Rng rng(1);
  const auto still = langevin_step(st, make_score_fn(GaussianMixture(3, {{Vector::Ones(3), 0.0, 1.0}})), grid, 0.0, rng);
  CHECK(still.x == st.x);
  CHECK(still.sigma_index == 4);
  CHECK(still.nfe_so_far == 8);
  CHECK(still.step == 1);
  Rng a(2), b(2);
  const auto moved = langevin_step(st, zero, grid, 0.3, a);
  CHECK((moved.x - (st.x + std::sqrt(0.3) * normal_vector(b, 3))).norm() < 1e-15);
  st.sigma_index = 10;
  CHECK_THROWS_AS(langevin_step(st, zero, grid, 0.1, rng), std::out_of_range);
  st.sigma_index = 0;
  const ScoreFn bad = [](const Vector& x, double) -> Vector { return Vector::Constant(x.size(), INFINITY); };
  CHECK_THROWS_AS(langevin_step(st, bad, grid, 0.1, rng, 3), DivergenceError);
  try {
    langevin_step(st, bad, grid, 0.1, rng, 3);
  } catch (const DivergenceError& e) {
    CHECK(e.chain() == 3);
    CHECK(e.step() == 1);
  }
}

TEST_CASE("langevin stationary variance matches a scalar simulation") {
  const double eta = 0.1, v = 1.0;
  const NoiseGrid grid(1e-6, 1.0, 2);
  GaussianMixture target(1, {{Vector::Zero(1), v, 1.0}});
  const ScoreFn score = make_score_fn(target);
  const int n = 100000, burn = 1000;

  Rng rng(3);
  ChainState st{Vector::Zero(1), 0, 0, 0};
  double acc = 0.0;
  for (int i = 0; i < n + burn; ++i) {
    st = langevin_step(st, score, grid, eta, rng);
    if (i >= burn) acc += st.x[0] * st.x[0];
  }
  const double chain_var = acc / n;

  Rng other(99);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double var_eff = v + 1e-12;
  double y = 0.0, brute = 0.0;
  for (int i = 0; i < n + burn; ++i) {
    y += -0.5 * eta * y / var_eff + std::sqrt(eta) * n01(other);
    if (i >= burn) brute += y * y;
  }
  brute /= n;
  CHECK(chain_var == doctest::Approx(brute).epsilon(0.1));
  const double closed = eta / (1.0 - std::pow(1.0 - eta / (2.0 * v), 2));
  CHECK(brute == doctest::Approx(closed).epsilon(0.1));
}

TEST_CASE("sigma update follows the predictor and never counts NFE") {
  const NoiseGrid grid(0.01, 50.0, 20);
  const OneHot pred(grid, 13);
  ChainState st{Vector::Zero(4), 2, 5, 11};
  Rng rng(4);
  for (auto mode : {SigmaUpdateMode::kArgmax, SigmaUpdateMode::kSampled}) {
    const auto next = sigma_update(st, pred, mode, rng);
    CHECK(next.sigma_index == 13);
    CHECK(next.nfe_so_far == 11);
    CHECK(next.x == st.x);
  }
  CHECK_THROWS_AS(sigma_update(st, Broken(grid), SigmaUpdateMode::kArgmax, rng), std::logic_error);
  CHECK(sigma_update_from_string("sampled") == SigmaUpdateMode::kSampled);
  CHECK_THROWS_AS(sigma_update_from_string("max"), std::invalid_argument);
}

TEST_CASE("exact posterior sigma update recovers the corruption level") {
  const auto mix = make_benchmark_mixture({.dim = 256, .modes = 50, .subspace_dim = 8, .min_separation = 20.0});
  const NoiseGrid grid(0.01, 50.0, 100);
  const ExactPosterior post(mix, grid);
  Rng rng(5);
  std::uniform_int_distribution<int> level(0, grid.size() - 1);
  int hits = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const int m = level(rng);
    ChainState st{Vector(mix.mean(t % 50)) + grid.level(m) * normal_vector(rng, mix.dim()), 0, 0, 0};
    hits += std::abs(sigma_update(st, post, SigmaUpdateMode::kArgmax, rng).sigma_index - m) <= 2;
  }
  CHECK(hits >= 0.95 * trials);
}

TEST_CASE("kappa to eta") {
  CHECK(eta_from_kappa(0.0009, 3072) == doctest::Approx(0.0499).epsilon(1e-3));
  CHECK(eta_from_kappa(0.018, 3072) == doctest::Approx(0.9977).epsilon(1e-3));
  CHECK(eta_from_kappa(0.018, 196608) == doctest::Approx(7.98).epsilon(1e-3));
  CHECK(eta_from_kappa(0.25, 1) == 0.25);
  CHECK_THROWS_AS(eta_from_kappa(0.0, 4), std::domain_error);
  CHECK_THROWS_AS(eta_from_kappa(0.1, 0), std::domain_error);
  DLGConfig cfg;
  CHECK_THROWS_AS(cfg.resolved_eta(4), std::invalid_argument);
  cfg.kappa = 0.5;
  CHECK(cfg.resolved_eta(16) == 2.0);
  cfg.eta = 1.0;
  CHECK_FALSE(cfg.validate().empty());
}

TEST_CASE("DLG config validation lists every violation") {
  DLGConfig cfg;
  cfg.n_skip = 0;
  cfg.n_den = 0;
  cfg.n_chains = 0;
  CHECK(cfg.validate().size() == 4);
  Bench b;
  CHECK_THROWS_AS(dlg_run(b.score, b.posterior, b.sched, karras(), cfg, 16, 1), ValidationError);
}

TEST_CASE("DLG with n_skip one emits every iterate and reconciles its ledger") {
  Bench b;
  std::atomic<long> calls{0};
  auto cfg = small_dlg(1, 9, 3, 20);
  const auto out = dlg_run(counted(b.score, calls), b.posterior, b.sched, karras(), cfg, 16, 7);
  CHECK(out.samples.size() == 60);
  for (const auto& c : out.chain_sigma_indices) CHECK(c.size() == 20);
  CHECK(out.ledger.total() == calls.load());
  CHECK(out.ledger.samples == 60);
  long per_sample = 0;
  for (long v : out.sample_nfe) per_sample += v;
  CHECK(per_sample == out.ledger.langevin + out.ledger.denoise);
  for (long v : out.sample_nfe) CHECK(v == 1 + 9 + 1);
  for (int i = 0; i < 60; ++i) CHECK(out.sample_chain[static_cast<std::size_t>(i)] == i % 3);
}

TEST_CASE("DLG average NFE approaches n_skip + n_den as initialization amortizes") {
  Bench b;
  double previous = INFINITY;
  for (int per_chain : {5, 50, 200}) {
    const auto out = dlg_run(b.score, b.posterior, b.sched, karras(), small_dlg(1, 9, 2, per_chain), 16, 3);
    const double gap = std::abs(out.ledger.average_amortized() - 10.0);
    CHECK(gap < previous);
    previous = gap;
  }
  CHECK(previous <= 2.0);
}

TEST_CASE("DLG denoises the block minimum and lands on modes") {
  Bench b;
  auto cfg = small_dlg(4, 9, 2, 30);
  const auto out = dlg_run(b.score, b.posterior, b.sched, karras(), cfg, 16, 11);
  const double bound = 3.0 * 0.01 * 4.0;
  for (const auto& x : out.samples) CHECK(b.mix.nearest_mode(x).second <= bound);
  double block_mean = 0.0, chain_mean = 0.0;
  long chain_count = 0;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const int c = out.sample_chain[i];
    const std::size_t j = i / 2;
    const auto& seq = out.chain_sigma_indices[static_cast<std::size_t>(c)];
    int mn = seq[4 * j];
    for (std::size_t k = 4 * j; k < 4 * j + 4; ++k) mn = std::min(mn, seq[k]);
    CHECK(out.sample_sigma_index[i] == mn);
    block_mean += b.posterior.grid().level(mn);
  }
  for (const auto& seq : out.chain_sigma_indices)
    for (int m : seq) {
      CHECK(m >= 0);
      CHECK(m < 1000);
      chain_mean += b.posterior.grid().level(m);
      ++chain_count;
    }
  CHECK(block_mean / static_cast<double>(out.samples.size()) <= chain_mean / static_cast<double>(chain_count));
}

TEST_CASE("DLG is reproducible and independent of the thread count") {
  Bench b;
  auto cfg = small_dlg(2, 5, 4, 8);
  const auto a = dlg_run(b.score, b.posterior, b.sched, karras(), cfg, 16, 21, 1);
  const auto c = dlg_run(b.score, b.posterior, b.sched, karras(), cfg, 16, 21, 3);
  REQUIRE(a.samples.size() == c.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == c.samples[i]);
  CHECK(a.sample_nfe == c.sample_nfe);
  const auto d = dlg_run(b.score, b.posterior, b.sched, karras(), cfg, 16, 22, 1);
  CHECK_FALSE(a.samples[0] == d.samples[0]);
}

TEST_CASE("DLG reports the diverging chain") {
  Bench b;
  const ScoreFn bad = [](const Vector& x, double) -> Vector { return Vector::Constant(x.size(), NAN); };
  auto cfg = small_dlg(1, 3, 3, 2);
  cfg.init.start_point = Vector(b.mix.mean(0));
  try {
    dlg_run(bad, b.posterior, b.sched, karras(), cfg, 16, 1, 1);
    FAIL("expected a divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.chain() == 0);
  }
}

TEST_CASE("plain Langevin is stuck in its initial mode while ALD moves") {
  Bench b;
  const NoiseGrid grid(0.01, 50.0, 1000);
  LangevinConfig lc;
  lc.eta = 1e-4;
  lc.n_chains = 2;
  lc.steps = 10000;
  lc.n_skip = 10;
  lc.start_point = Vector(b.mix.mean(0));
  const auto lang = plain_langevin_run(b.score, grid, lc, 16, 4);
  CHECK(mode_coverage(lang.samples, b.mix, 3.0, 0.01).covered == 1);
  CHECK(lang.ledger.langevin == 20000);

  AldConfig ac;
  ac.n_chains = 10;
  const auto ald = ald_run(b.score, grid, ac, 16, 4);
  CHECK(mode_coverage(ald.samples, b.mix, 3.0, 0.01).covered > 1);
  CHECK(ald.ledger.langevin == 10 * 1000);
}

TEST_CASE("ALD on a single level is plain Langevin") {
  Bench b;
  const NoiseGrid one(0.05, 50.0, 1);
  const Vector start = Vector(b.mix.mean(2));
  AldConfig ac;
  ac.eta = 1e-3;
  ac.iters_per_level = 40;
  ac.start_point = start;
  LangevinConfig lc;
  lc.eta = 1e-3;
  lc.steps = 40;
  lc.n_skip = 40;
  lc.start_point = start;
  const auto a = ald_run(b.score, one, ac, 16, 8);
  const auto l = plain_langevin_run(b.score, one, lc, 16, 8);
  REQUIRE(l.samples.size() == 1);
  CHECK(a.samples[0] == l.samples[0]);
  CHECK(a.ledger.total() == l.ledger.total());
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](int i) { hit[static_cast<std::size_t>(i)] += 1; });
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](int i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}
