#pragma once

// Experiment configuration: a single JSON document with schedule, sampler,
// integrator, diagnostics and sweep blocks. Parsing applies defaults and collects
// every violation before anything runs.

#include "dmcmc/classifier.hpp"
#include "dmcmc/diagnostics.hpp"
#include "dmcmc/integrators.hpp"
#include "dmcmc/mixture.hpp"
#include "dmcmc/samplers.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace dmcmc {

inline constexpr const char* kArtifactVersion = "0.3.0";
inline constexpr int kConfigSchemaVersion = 1;

struct ScheduleConfig {
  double sigma_min = 0.01;
  double sigma_max = 50.0;
  int levels = 1000;

  NoiseGrid grid() const { return NoiseGrid(sigma_min, sigma_max, levels); }
  VESchedule schedule() const { return VESchedule(sigma_min, sigma_max); }
};

struct ClassifierTrainingConfig {
  int levels = 32;  // grid size for the trained classifier (same sigma range)
  int n_per_level = 400;
  int held_out_per_level = 100;
  LevelSampling sampling = LevelSampling::kPrior;
  int bands = 8;
  int codebook = 64;  // clean reference points for the nearest-point feature, 0 disables it
  TrainConfig train;
};

/// Where a DLG run gets q(sigma | x): exact Bayes posterior, a saved classifier, or one
/// trained on the fly.
struct ClassifierSource {
  enum class Kind { kExact, kFile, kTrain } kind = Kind::kExact;
  std::string path;
  ClassifierTrainingConfig training;
};

enum class SamplerAlgo { kDlg, kLangevin, kAld };
std::string_view to_string(SamplerAlgo a);

struct SamplerBlock {
  SamplerAlgo algo = SamplerAlgo::kDlg;
  std::string label;  // output file suffix, defaults to the algo name
  DLGConfig dlg;
  LangevinConfig langevin;
  AldConfig ald;
  std::optional<int> start_mode;  // initialize at this mixture mean
  ClassifierSource classifier;
};

struct DiagnosticsConfig {
  double threshold_multiple = 3.0;
  int max_lag = 50;
  AutocorrEstimator autocorr = AutocorrEstimator::kPooled;
  int ground_truth_samples = 0;  // reference set size, 0 = same as the sample count
  int raster_size = 256;
};

struct BenchmarkConfig {
  std::vector<IntegratorKind> integrators;
  std::vector<int> nfe = {8, 16, 32, 64};
  std::vector<double> sigma_starts = {0.5, 50.0};
  std::vector<double> rk45_rtols = {1e-3, 1e-5};
  double gaussian_s = 1.0;
  int gaussian_dim = 100000;
  int mog_samples = 1000;
  double order_sigma_start = 1.0;
  double order_sigma_end = 0.5;
  std::vector<int> order_steps = {16, 32, 64, 128, 256};
};

struct AblationConfig {
  std::vector<double> eta;    // exactly one of eta / kappa is non-empty
  std::vector<double> kappa;
  std::vector<double> nden_frac = {0.5};
  std::vector<int> nfe = {20};
};

struct ExperimentConfig {
  nlohmann::json mixture_json;  // as given: inline {dim, modes} or {"benchmark": {...}}
  std::optional<BenchmarkMixtureSpec> mixture_generator;
  ScheduleConfig schedule;
  SamplerBlock sampler;
  std::vector<SamplerBlock> baselines;
  IntegratorSpec integrator;
  DiagnosticsConfig diagnostics;
  BenchmarkConfig benchmark;
  AblationConfig ablation;
  ClassifierTrainingConfig classifier_training;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;

  GaussianMixture mixture() const;
};

/// Parses and validates. Relative file paths resolve against base_dir. A run manifest
/// is accepted too: its embedded config snapshot is used.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Resolved snapshot with every default filled in; parse_config(snapshot) yields the
/// same experiment.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

nlohmann::json integrator_to_json(const IntegratorSpec& spec);

}  // namespace dmcmc
