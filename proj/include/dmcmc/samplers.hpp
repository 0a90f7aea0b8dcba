#pragma once

// Markov-chain samplers on the product space of data and noise level: plain
// Langevin, annealed Langevin, and Denoising Langevin Gibbs (DLG).

#include "dmcmc/classifier.hpp"
#include "dmcmc/common.hpp"
#include "dmcmc/diagnostics.hpp"
#include "dmcmc/integrators.hpp"
#include "dmcmc/ve_process.hpp"

#include <optional>

namespace dmcmc {

struct ChainState {
  Vector x;
  int sigma_index = 0;  // 0-based grid level
  long step = 0;
  long nfe_so_far = 0;
};

enum class SigmaUpdateMode { kArgmax, kSampled };

std::string_view to_string(SigmaUpdateMode m);
SigmaUpdateMode sigma_update_from_string(std::string_view s);

/// x <- x + (eta / 2) s(x, tau_idx) + sqrt(eta) eps. Counts one NFE.
ChainState langevin_step(const ChainState& state, const ScoreFn& score, const NoiseGrid& grid, double eta,
                         Rng& rng, long chain = -1);

/// Replaces sigma_index by the argmax of (or a draw from) the predictor output.
/// Does not touch nfe_so_far.
ChainState sigma_update(const ChainState& state, const NoiseLevelPredictor& predictor, SigmaUpdateMode mode,
                        Rng& rng);

/// eta = sqrt(d) * kappa
double eta_from_kappa(double kappa, int d);

struct InitConfig {
  /// Start from this point instead of generating one with the integrator.
  std::optional<Vector> start_point;
  int integrator_nfe = 37;
  double noise_var = 0.25;
  int gibbs_iters = 20;
};

struct DLGConfig {
  std::optional<double> eta;
  std::optional<double> kappa;
  int n_skip = 1;
  int n_den = 20;
  SigmaUpdateMode sigma_update = SigmaUpdateMode::kArgmax;
  int n_chains = 1;
  int samples_per_chain = 100;
  InitConfig init;

  double resolved_eta(int dim) const;
  std::vector<std::string> validate() const;
};

/// Output of any sampler. Samples are in global emission order: sample j of chain c
/// sits at j * n_chains + c.
struct SamplerOutput {
  std::vector<Vector> samples;
  std::vector<int> sample_chain;
  std::vector<long> sample_nfe;         // Langevin + denoising NFE charged to the sample
  std::vector<int> sample_sigma_index;  // level the sample was denoised from
  std::vector<std::vector<int>> chain_sigma_indices;  // every post-init iterate, per chain
  std::vector<long> init_nfe_per_chain;
  NfeLedger ledger;
};

/// Integrator spec used to spend `budget` NFE on one denoising run.
IntegratorSpec with_budget(IntegratorSpec spec, int budget);

/// Denoising Langevin Gibbs. Each chain is initialized, then alternates Langevin and
/// noise-level updates; within each block of n_skip iterates the one with the smallest
/// noise level (earliest on ties) is integrated down to sigma_min with n_den NFE and
/// Tweedie-denoised.
SamplerOutput dlg_run(const ScoreFn& score, const NoiseLevelPredictor& predictor, const VESchedule& sched,
                      const IntegratorSpec& integrator, const DLGConfig& cfg, int dim, std::uint64_t seed,
                      int threads = 1);

struct LangevinConfig {
  double eta = 1e-4;
  int level = 0;  // grid index the chain runs at
  int n_chains = 1;
  int steps = 1000;
  int n_skip = 1;
  bool denoise_output = true;
  std::optional<Vector> start_point;
};

/// Unadjusted Langevin at one fixed noise level.
SamplerOutput plain_langevin_run(const ScoreFn& score, const NoiseGrid& grid, const LangevinConfig& cfg,
                                 int dim, std::uint64_t seed, int threads = 1);

struct AldConfig {
  /// Step size at sigma_min; level m uses eta * (tau_m / tau_1)^2.
  double eta = 2e-5;
  int iters_per_level = 1;
  int n_chains = 1;
  bool denoise_output = true;
  std::optional<Vector> start_point;  // defaults to N(0, sigma_max^2 I)
};

/// Annealed Langevin down the full grid; one sample per chain.
SamplerOutput ald_run(const ScoreFn& score, const NoiseGrid& grid, const AldConfig& cfg, int dim, std::uint64_t seed,
                      int threads = 1);

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first failure.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace dmcmc
