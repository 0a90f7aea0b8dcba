#include "dmcmc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace dmcmc {

std::string_view to_string(SigmaUpdateMode m) { return m == SigmaUpdateMode::kArgmax ? "argmax" : "sampled"; }

SigmaUpdateMode sigma_update_from_string(std::string_view s) {
  if (s == "argmax") return SigmaUpdateMode::kArgmax;
  if (s == "sampled") return SigmaUpdateMode::kSampled;
  throw std::invalid_argument("unknown sigma_update mode '" + std::string(s) + "'");
}

ChainState langevin_step(const ChainState& state, const ScoreFn& score, const NoiseGrid& grid, double eta,
                         Rng& rng, long chain) {
  if (state.sigma_index < 0 || state.sigma_index >= grid.size())
    throw std::out_of_range("langevin_step: sigma_index outside the grid");
  if (!(eta >= 0.0)) throw std::invalid_argument("langevin_step: eta must be >= 0");
  ChainState next = state;
  const Vector s = score(state.x, grid.level(state.sigma_index));
  next.x = state.x + (0.5 * eta) * s;
  if (eta > 0.0) next.x += std::sqrt(eta) * normal_vector(rng, state.x.size());
  ++next.step;
  ++next.nfe_so_far;
  if (!next.x.allFinite()) throw DivergenceError("langevin_step: non-finite iterate", next.step, chain);
  return next;
}

ChainState sigma_update(const ChainState& state, const NoiseLevelPredictor& predictor, SigmaUpdateMode mode,
                        Rng& rng) {
  const Vector p = predictor.predict(state.x);
  if (p.size() != predictor.grid().size() || !p.allFinite() || (p.array() < 0.0).any() ||
      std::abs(p.sum() - 1.0) > 1e-6)
    throw std::logic_error("sigma_update: predictor output is not a probability vector over the grid");
  ChainState next = state;
  if (mode == SigmaUpdateMode::kArgmax) {
    next.sigma_index = argmax_index(p);
  } else {
    std::discrete_distribution<int> pick(p.data(), p.data() + p.size());
    next.sigma_index = pick(rng);
  }
  return next;
}

double eta_from_kappa(double kappa, int d) {
  if (!(kappa > 0.0)) throw std::domain_error("eta_from_kappa: kappa must be > 0");
  if (d < 1) throw std::domain_error("eta_from_kappa: d must be >= 1");
  return std::sqrt(static_cast<double>(d)) * kappa;
}

double DLGConfig::resolved_eta(int dim) const {
  if (eta.has_value() == kappa.has_value())
    throw std::invalid_argument("DLGConfig: set exactly one of eta and kappa");
  return eta ? *eta : eta_from_kappa(*kappa, dim);
}

std::vector<std::string> DLGConfig::validate() const {
  std::vector<std::string> issues;
  if (eta.has_value() == kappa.has_value()) issues.push_back("sampler: set exactly one of eta and kappa");
  if (eta && !(*eta > 0.0)) issues.push_back("sampler.eta must be > 0");
  if (kappa && !(*kappa > 0.0)) issues.push_back("sampler.kappa must be > 0");
  if (n_skip < 1) issues.push_back("sampler.n_skip must be >= 1");
  if (n_den < 1) issues.push_back("sampler.n_den must be >= 1");
  if (n_chains < 1) issues.push_back("sampler.n_chains must be >= 1");
  if (samples_per_chain < 1) issues.push_back("sampler.samples_per_chain must be >= 1");
  if (!init.start_point && init.integrator_nfe < 1) issues.push_back("sampler.init.integrator_nfe must be >= 1");
  if (!(init.noise_var >= 0.0)) issues.push_back("sampler.init.noise_var must be >= 0");
  if (init.gibbs_iters < 0) issues.push_back("sampler.init.gibbs_iters must be >= 0");
  return issues;
}

IntegratorSpec with_budget(IntegratorSpec spec, int budget) {
  if (spec.kind != IntegratorKind::kRk45) spec.steps = steps_for_budget(spec.kind, budget);
  return spec;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct ChainOutput {
  std::vector<Vector> samples;
  std::vector<long> sample_nfe;
  std::vector<int> sample_sigma_index;
  std::vector<int> sigma_indices;
  NfeLedger ledger;
};

SamplerOutput interleave(std::vector<ChainOutput>& chains) {
  SamplerOutput out;
  std::size_t per_chain = 0;
  for (const auto& c : chains) per_chain = std::max(per_chain, c.samples.size());
  for (std::size_t j = 0; j < per_chain; ++j) {
    for (std::size_t c = 0; c < chains.size(); ++c) {
      if (j >= chains[c].samples.size()) continue;
      out.samples.push_back(std::move(chains[c].samples[j]));
      out.sample_chain.push_back(static_cast<int>(c));
      out.sample_nfe.push_back(chains[c].sample_nfe[j]);
      out.sample_sigma_index.push_back(chains[c].sample_sigma_index[j]);
    }
  }
  for (auto& c : chains) {
    out.chain_sigma_indices.push_back(std::move(c.sigma_indices));
    out.init_nfe_per_chain.push_back(c.ledger.init);
    out.ledger += c.ledger;
  }
  return out;
}

Vector sample_start(Rng& rng, int dim, double sigma_max) { return sigma_max * normal_vector(rng, dim); }

// Rethrows a divergence with the chain id attached.
template <class Fn>
auto with_chain_context(long chain, Fn&& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    if (e.chain() >= 0) throw;
    throw DivergenceError(e.what(), e.step(), chain);
  }
}

}  // namespace

SamplerOutput dlg_run(const ScoreFn& score, const NoiseLevelPredictor& predictor, const VESchedule& sched,
                      const IntegratorSpec& integrator, const DLGConfig& cfg, int dim, std::uint64_t seed,
                      int threads) {
  if (auto issues = cfg.validate(); !issues.empty()) throw ValidationError(std::move(issues));
  if (cfg.init.start_point && cfg.init.start_point->size() != dim)
    throw std::invalid_argument("dlg_run: start point dimension mismatch");
  const NoiseGrid& grid = predictor.grid();
  if (grid.sigma_min() != sched.sigma_min() || grid.sigma_max() > sched.sigma_max())
    throw std::invalid_argument("dlg_run: predictor grid does not fit the schedule's sigma range");

  const double eta = cfg.resolved_eta(dim);
  const double sigma_min = sched.sigma_min();
  const IntegratorSpec init_spec = with_budget(integrator, std::max(1, cfg.init.integrator_nfe));
  const IntegratorSpec den_spec = with_budget(integrator, cfg.n_den);

  std::vector<ChainOutput> chains(static_cast<std::size_t>(cfg.n_chains));
  parallel_for(cfg.n_chains, threads, [&](int c) {
    with_chain_context(c, [&] {
      Rng rng = make_stream(seed, StreamTag::kChain, static_cast<std::uint32_t>(c));
      ChainOutput& out = chains[static_cast<std::size_t>(c)];

      // Initialization: a generated (or given) point, perturbed, then a few Gibbs sweeps.
      ChainState st;
      if (cfg.init.start_point) {
        st.x = *cfg.init.start_point;
      } else {
        const Vector noise = sched.sigma_max() * normal_vector(rng, dim);
        const auto gen = integrate(init_spec, {noise, sched.sigma_max(), sigma_min}, score, sched, rng);
        st.x = tweedie_denoise(score, gen.x_final, sigma_min);
        st.nfe_so_far = gen.nfe + 1;
      }
      if (cfg.init.noise_var > 0.0) st.x += std::sqrt(cfg.init.noise_var) * normal_vector(rng, dim);
      st = sigma_update(st, predictor, cfg.sigma_update, rng);
      for (int i = 0; i < cfg.init.gibbs_iters; ++i) {
        st = langevin_step(st, score, grid, eta, rng, c);
        st = sigma_update(st, predictor, cfg.sigma_update, rng);
      }
      out.ledger.init = st.nfe_so_far;

      out.samples.reserve(static_cast<std::size_t>(cfg.samples_per_chain));
      for (int s = 0; s < cfg.samples_per_chain; ++s) {
        const long before = st.nfe_so_far;
        ChainState best;
        bool have_best = false;
        for (int j = 0; j < cfg.n_skip; ++j) {
          st = langevin_step(st, score, grid, eta, rng, c);
          st = sigma_update(st, predictor, cfg.sigma_update, rng);
          out.sigma_indices.push_back(st.sigma_index);
          if (!have_best || st.sigma_index < best.sigma_index) {
            best = st;
            have_best = true;
          }
        }
        const long langevin_nfe = st.nfe_so_far - before;

        const double sigma_start = grid.level(best.sigma_index);
        const auto den = integrate(den_spec, {best.x, sigma_start, sigma_min}, score, sched, rng);
        Vector sample = tweedie_denoise(score, den.x_final, sigma_min);
        if (!sample.allFinite()) throw DivergenceError("dlg_run: non-finite denoised sample", st.step, c);
        const long denoise_nfe = den.nfe + 1;

        out.ledger.langevin += langevin_nfe;
        out.ledger.denoise += denoise_nfe;
        out.ledger.samples += 1;
        out.samples.push_back(std::move(sample));
        out.sample_nfe.push_back(langevin_nfe + denoise_nfe);
        out.sample_sigma_index.push_back(best.sigma_index);
      }
      return 0;
    });
  });
  return interleave(chains);
}

SamplerOutput plain_langevin_run(const ScoreFn& score, const NoiseGrid& grid, const LangevinConfig& cfg, int dim,
                                 std::uint64_t seed, int threads) {
  if (cfg.n_chains < 1 || cfg.steps < 0 || cfg.n_skip < 1)
    throw std::invalid_argument("plain_langevin_run: need n_chains >= 1, steps >= 0, n_skip >= 1");
  if (cfg.level < 0 || cfg.level >= grid.size()) throw std::out_of_range("plain_langevin_run: level outside grid");
  const double sigma = grid.level(cfg.level);
  std::vector<ChainOutput> chains(static_cast<std::size_t>(cfg.n_chains));
  parallel_for(cfg.n_chains, threads, [&](int c) {
    with_chain_context(c, [&] {
      Rng rng = make_stream(seed, StreamTag::kChain, static_cast<std::uint32_t>(c));
      ChainOutput& out = chains[static_cast<std::size_t>(c)];
      ChainState st;
      st.x = cfg.start_point ? *cfg.start_point : Vector(sample_start(rng, dim, grid.sigma_max()));
      st.sigma_index = cfg.level;
      for (int i = 1; i <= cfg.steps; ++i) {
        st = langevin_step(st, score, grid, cfg.eta, rng, c);
        out.sigma_indices.push_back(cfg.level);
        if (i % cfg.n_skip != 0) continue;
        long nfe = cfg.n_skip;
        Vector sample = st.x;
        if (cfg.denoise_output) {
          sample = tweedie_denoise(score, st.x, sigma);
          ++nfe;
          out.ledger.denoise += 1;
        }
        out.samples.push_back(std::move(sample));
        out.sample_nfe.push_back(nfe);
        out.sample_sigma_index.push_back(cfg.level);
        out.ledger.samples += 1;
      }
      out.ledger.langevin += st.nfe_so_far;
      return 0;
    });
  });
  return interleave(chains);
}

SamplerOutput ald_run(const ScoreFn& score, const NoiseGrid& grid, const AldConfig& cfg, int dim,
                      std::uint64_t seed, int threads) {
  if (cfg.n_chains < 1 || cfg.iters_per_level < 1 || !(cfg.eta > 0.0))
    throw std::invalid_argument("ald_run: need n_chains >= 1, iters_per_level >= 1, eta > 0");
  const double tau1 = grid.level(0);
  std::vector<ChainOutput> chains(static_cast<std::size_t>(cfg.n_chains));
  parallel_for(cfg.n_chains, threads, [&](int c) {
    with_chain_context(c, [&] {
      Rng rng = make_stream(seed, StreamTag::kChain, static_cast<std::uint32_t>(c));
      ChainOutput& out = chains[static_cast<std::size_t>(c)];
      ChainState st;
      st.x = cfg.start_point ? *cfg.start_point : Vector(sample_start(rng, dim, grid.sigma_max()));
      for (int m = grid.size() - 1; m >= 0; --m) {
        st.sigma_index = m;
        const double ratio = grid.level(m) / tau1;
        const double eta_m = cfg.eta * ratio * ratio;
        for (int i = 0; i < cfg.iters_per_level; ++i) {
          st = langevin_step(st, score, grid, eta_m, rng, c);
          out.sigma_indices.push_back(m);
        }
      }
      Vector sample = st.x;
      long nfe = st.nfe_so_far;
      out.ledger.langevin += st.nfe_so_far;
      if (cfg.denoise_output) {
        sample = tweedie_denoise(score, st.x, grid.sigma_min());
        ++nfe;
        out.ledger.denoise += 1;
      }
      out.samples.push_back(std::move(sample));
      out.sample_nfe.push_back(nfe);
      out.sample_sigma_index.push_back(0);
      out.ledger.samples += 1;
      return 0;
    });
  });
  return interleave(chains);
}

}  // namespace dmcmc
