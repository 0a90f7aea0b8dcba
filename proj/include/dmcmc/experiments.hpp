#pragma once

// Experiment orchestration: mixing study, integrator benchmark, ablation sweep and
// classifier training. Every command validates first, writes CSVs into its output
// directory and finishes with an atomically written manifest.json.

#include "dmcmc/config.hpp"
#include "dmcmc/samplers.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace dmcmc {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;

/// Everything a mixing run measures for one sampler block.
struct SamplerReport {
  std::string label;
  SamplerOutput output;
  ModeAssignment assignment;
  std::vector<double> autocorr;  // averaged over chains, each chain's own class sequence
  ChiSquare chi_square;
  double fgd = 0.0;            // against a fresh ground-truth set
  double fgd_reference = 0.0;  // between two independent ground-truth sets of the same size
  nlohmann::json classifier;   // how the DLG noise-level predictor was obtained
  double seconds = 0.0;
};

/// Reference points drawn from the clean mixture on the ground-truth stream.
std::vector<Vector> ground_truth_set(const GaussianMixture& mix, std::size_t n, std::uint64_t seed,
                                     std::uint32_t index = 0);

/// Builds the noise-level predictor a DLG block asks for. `mix` must outlive the result.
std::unique_ptr<NoiseLevelPredictor> make_predictor(const ClassifierSource& src, const GaussianMixture& mix,
                                                    const ScheduleConfig& schedule, std::uint64_t seed,
                                                    nlohmann::json* report = nullptr);

/// Runs one sampler block and all of its diagnostics. `seed` feeds the chain and
/// ground-truth streams. A DLG block builds its own predictor unless one is passed.
SamplerReport run_sampler(const SamplerBlock& block, const ExperimentConfig& cfg, const GaussianMixture& mix,
                          std::uint64_t seed, const NoiseLevelPredictor* predictor = nullptr);

/// Trained classifier together with its held-out scores.
struct TrainedClassifier {
  std::unique_ptr<NoiseClassifier> classifier;
  TrainReport report;
  double exact_agreement = 0.0;  // argmax within +-2 of the exact posterior on the held-out set
};

TrainedClassifier train_noise_classifier(const GaussianMixture& mix, const ScheduleConfig& schedule,
                                         const ClassifierTrainingConfig& tc, std::uint64_t seed);

/// Relative terminal error of one integrator on the closed-form Gaussian target.
/// Deterministic integrators use the pathwise error against the exact flow; stochastic
/// ones the relative error of the terminal per-coordinate variance.
struct GaussianBenchCell {
  double error = 0.0;
  long nfe = 0;
};

GaussianBenchCell gaussian_bench_cell(const IntegratorSpec& spec, double s, int dim, double sigma_start,
                                      double sigma_end, const VESchedule& sched, std::uint64_t seed);

/// Least-squares slope of log(error) against log(1 / steps).
double richardson_order(const std::vector<int>& steps, const std::vector<double>& errors);

/// Cell of the ablation grid.
struct AblationCell {
  double eta = 0.0;
  double kappa = 0.0;  // 0 when the sweep is over eta
  double nden_frac = 0.0;
  int nfe = 0;
  int n_den = 0;
  int n_skip = 0;
  double fgd = 0.0;
  double avg_nfe = 0.0;
};

/// Splits a per-sample budget n into (n_den, n_skip), both at least 1.
std::pair<int, int> split_budget(int nfe, double nden_frac);

/// Command entry points. Each returns the manifest it wrote to <output_dir>/manifest.json.
nlohmann::json cmd_mixing(const ExperimentConfig& cfg);
nlohmann::json cmd_benchmark_integrators(const ExperimentConfig& cfg);
nlohmann::json cmd_ablation(const ExperimentConfig& cfg);
nlohmann::json cmd_train_classifier(const ExperimentConfig& cfg);

/// Writes `content` to path through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

}  // namespace dmcmc
