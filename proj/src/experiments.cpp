#include "dmcmc/experiments.hpp"

#include "dmcmc/raster.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

namespace dmcmc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) text_ += ',';
      text_ += h;
      first = false;
    }
    text_ += '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((text_ += (first ? "" : ","), text_ += cell(cells), first = false), ...);
    text_ += '\n';
  }

  const std::string& text() const { return text_; }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(std::string_view v) { return std::string(v); }
  static std::string cell(const char* v) { return v; }

  std::string text_;
};

// Files land only inside root; names are fixed or built from validated labels.
class OutputDir {
 public:
  explicit OutputDir(const std::string& root) : root_(root) { fs::create_directories(root_); }

  void write(const std::string& name, const std::string& content) {
    write_file_atomic(root_ / name, content);
    listing_.push_back({{"file", name}, {"bytes", content.size()}});
  }

  json finish(json manifest, Clock::time_point t0) {
    manifest["outputs"] = listing_;
    manifest["timings"]["total_seconds"] = seconds_since(t0);
    write_file_atomic(root_ / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
  }

 private:
  fs::path root_;
  json listing_ = json::array();
};

json base_manifest(const char* command, const ExperimentConfig& cfg) {
  json m;
  m["artifact_version"] = kArtifactVersion;
  m["schema_versions"] = {{"config", kConfigSchemaVersion}, {"csv", kCsvSchemaVersion}, {"manifest", kManifestSchemaVersion}};
  m["command"] = command;
  m["config"] = config_to_json(cfg);
  m["master_seed"] = cfg.seed;
  m["rng_derivation"] = kRngDerivation;
  m["rng_streams"] = {{"chain", static_cast<int>(StreamTag::kChain)},
                      {"ground_truth", static_cast<int>(StreamTag::kGroundTruth)},
                      {"training", static_cast<int>(StreamTag::kTraining)},
                      {"held_out", static_cast<int>(StreamTag::kHeldOut)},
                      {"benchmark", static_cast<int>(StreamTag::kBenchmark)}};
  m["timings"] = json::object();
  return m;
}

json chi_to_json(const ChiSquare& c) {
  return {{"statistic", c.statistic}, {"dof", c.dof}, {"within_band", c.within_band()}};
}

std::size_t reference_size(const ExperimentConfig& cfg, std::size_t samples) {
  return cfg.diagnostics.ground_truth_samples > 0 ? static_cast<std::size_t>(cfg.diagnostics.ground_truth_samples)
                                                  : samples;
}

std::vector<Vector> chain_samples(const SamplerOutput& out, int chain) {
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    if (out.sample_chain[i] == chain) xs.push_back(out.samples[i]);
  return xs;
}

std::vector<double> mean_chain_autocorr(const SamplerOutput& out, const ModeAssignment& a, int num_modes, int max_lag,
                                        AutocorrEstimator est) {
  const int chains = static_cast<int>(out.init_nfe_per_chain.size());
  std::vector<std::vector<int>> seqs(static_cast<std::size_t>(chains));
  for (std::size_t i = 0; i < a.mode.size(); ++i) seqs[static_cast<std::size_t>(out.sample_chain[i])].push_back(a.mode[i]);
  const bool per_chain = std::all_of(seqs.begin(), seqs.end(), [](const auto& s) { return s.size() >= 2; });
  if (!per_chain) return class_autocorrelation(a.mode, num_modes, max_lag, est);
  std::vector<double> mean(static_cast<std::size_t>(max_lag) + 1, 0.0);
  for (const auto& s : seqs) {
    const auto acf = class_autocorrelation(s, num_modes, max_lag, est);
    for (std::size_t l = 0; l < mean.size(); ++l) mean[l] += acf[l] / chains;
  }
  return mean;
}

bool is_deterministic(IntegratorKind k) { return !is_stochastic(k); }

}  // namespace

std::vector<Vector> ground_truth_set(const GaussianMixture& mix, std::size_t n, std::uint64_t seed,
                                     std::uint32_t index) {
  Rng rng = make_stream(seed, StreamTag::kGroundTruth, index);
  std::vector<Vector> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(sample_smoothed(mix, 0.0, rng));
  return xs;
}

TrainedClassifier train_noise_classifier(const GaussianMixture& mix, const ScheduleConfig& schedule,
                                         const ClassifierTrainingConfig& tc, std::uint64_t seed) {
  const NoiseGrid grid(schedule.sigma_min, schedule.sigma_max, tc.levels);
  Rng train_rng = make_stream(seed, StreamTag::kTraining, 0);
  const LabeledSet train = make_training_set(mix, grid, tc.n_per_level, train_rng, tc.sampling);
  LabeledSet held;
  if (tc.held_out_per_level > 0) {
    Rng held_rng = make_stream(seed, StreamTag::kHeldOut, 0);
    held = make_training_set(mix, grid, tc.held_out_per_level, held_rng, tc.sampling);
  }
  TrainedClassifier out;
  Rng book_rng = make_stream(seed, StreamTag::kTraining, 1);
  out.classifier = std::make_unique<NoiseClassifier>(grid, mix.dim(), tc.bands, make_codebook(mix, tc.codebook, book_rng));
  out.report = out.classifier->train(train, tc.train, held.size() > 0 ? &held : nullptr);
  if (held.size() > 0) {
    const ExactPosterior exact(mix, grid);
    out.exact_agreement = argmax_agreement(*out.classifier, exact, held.x, 2);
  }
  return out;
}

std::unique_ptr<NoiseLevelPredictor> make_predictor(const ClassifierSource& src, const GaussianMixture& mix,
                                                    const ScheduleConfig& schedule, std::uint64_t seed,
                                                    json* report) {
  switch (src.kind) {
    case ClassifierSource::Kind::kExact:
      if (report) *report = {{"kind", "exact"}, {"levels", schedule.levels}};
      return std::make_unique<ExactPosterior>(mix, schedule.grid());
    case ClassifierSource::Kind::kFile: {
      auto clf = std::make_unique<NoiseClassifier>(NoiseClassifier::load(src.path));
      if (report) *report = {{"kind", "file"}, {"path", src.path}, {"levels", clf->grid().size()}};
      return clf;
    }
    case ClassifierSource::Kind::kTrain: {
      auto trained = train_noise_classifier(mix, schedule, src.training, seed);
      if (report)
        *report = {{"kind", "trained"},
                   {"levels", src.training.levels},
                   {"final_cross_entropy", trained.report.final_cross_entropy},
                   {"held_out_top1", trained.report.top1_accuracy},
                   {"held_out_within2", trained.report.within2_accuracy},
                   {"exact_agreement_within2", trained.exact_agreement}};
      return std::move(trained.classifier);
    }
  }
  throw std::logic_error("make_predictor: unknown classifier source");
}

SamplerReport run_sampler(const SamplerBlock& block, const ExperimentConfig& cfg, const GaussianMixture& mix,
                          std::uint64_t seed, const NoiseLevelPredictor* predictor) {
  SamplerReport rep;
  rep.label = block.label;
  const ScoreFn score = make_score_fn(mix);
  const NoiseGrid grid = cfg.schedule.grid();
  const VESchedule sched = cfg.schedule.schedule();
  std::optional<Vector> start;
  if (block.start_mode) start = Vector(mix.mean(*block.start_mode));

  const auto t0 = Clock::now();
  switch (block.algo) {
    case SamplerAlgo::kDlg: {
      DLGConfig d = block.dlg;
      if (start) d.init.start_point = start;
      std::unique_ptr<NoiseLevelPredictor> owned;
      if (!predictor) {
        owned = make_predictor(block.classifier, mix, cfg.schedule, seed, &rep.classifier);
        predictor = owned.get();
      }
      rep.output = dlg_run(score, *predictor, sched, cfg.integrator, d, mix.dim(), seed, cfg.threads);
      break;
    }
    case SamplerAlgo::kLangevin: {
      LangevinConfig l = block.langevin;
      l.start_point = start;
      rep.output = plain_langevin_run(score, grid, l, mix.dim(), seed, cfg.threads);
      break;
    }
    case SamplerAlgo::kAld: {
      AldConfig a = block.ald;
      a.start_point = start;
      rep.output = ald_run(score, grid, a, mix.dim(), seed, cfg.threads);
      break;
    }
  }
  rep.seconds = seconds_since(t0);

  const auto& d = cfg.diagnostics;
  rep.assignment = mode_coverage(rep.output.samples, mix, d.threshold_multiple, cfg.schedule.sigma_min);
  rep.autocorr = mean_chain_autocorr(rep.output, rep.assignment, mix.num_modes(), d.max_lag, d.autocorr);
  rep.chi_square = chi_square_class_fit(rep.assignment.class_counts, mix.weights());
  rep.fgd = rep.fgd_reference = std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = rep.output.samples.size();
  if (n >= 2) {
    const std::size_t m = reference_size(cfg, n);
    rep.fgd = frechet_gaussian_distance_auto(rep.output.samples, ground_truth_set(mix, m, seed, 0));
    rep.fgd_reference =
        frechet_gaussian_distance_auto(ground_truth_set(mix, m, seed, 1), ground_truth_set(mix, m, seed, 2));
  }
  return rep;
}

json cmd_mixing(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const GaussianMixture mix = cfg.mixture();
  OutputDir dir(cfg.output_dir);
  json manifest = base_manifest("mixing", cfg);

  std::vector<const SamplerBlock*> blocks{&cfg.sampler};
  for (const auto& b : cfg.baselines) blocks.push_back(&b);

  NfeLedger total;
  for (const SamplerBlock* block : blocks) {
    const SamplerReport rep = run_sampler(*block, cfg, mix, cfg.seed);
    const auto& a = rep.assignment;
    const std::string& label = rep.label;

    Csv coverage({"step", "modes_covered"});
    for (std::size_t i = 0; i < a.coverage_curve.size(); ++i) coverage.row(i + 1, a.coverage_curve[i]);
    dir.write("coverage_" + label + ".csv", coverage.text());

    Csv acf({"lag", "value"});
    for (std::size_t l = 0; l < rep.autocorr.size(); ++l) acf.row(l, rep.autocorr[l]);
    dir.write("autocorr_" + label + ".csv", acf.text());

    Csv hist({"mode", "count", "expected"});
    const double assigned = static_cast<double>(a.mode.size() - static_cast<std::size_t>(a.unassigned));
    for (int k = 0; k < mix.num_modes(); ++k)
      hist.row(k, a.class_counts[static_cast<std::size_t>(k)], assigned * mix.weights()[static_cast<std::size_t>(k)]);
    dir.write("class_hist_" + label + ".csv", hist.text());

    Csv nfe({"sample", "chain", "nfe", "sigma_index"});
    for (std::size_t i = 0; i < rep.output.samples.size(); ++i)
      nfe.row(i, rep.output.sample_chain[i], rep.output.sample_nfe[i], rep.output.sample_sigma_index[i]);
    dir.write("nfe_" + label + ".csv", nfe.text());

    if (mix.dim() == 2) {
      const Raster img = scatter_plot(rep.output.samples, mix, chain_samples(rep.output, 0), cfg.diagnostics.raster_size);
      dir.write("scatter_" + label + ".ppm", img.encode_ppm());
    }

    int full_at = -1;
    for (std::size_t i = 0; i < a.coverage_curve.size(); ++i)
      if (a.coverage_curve[i] == mix.num_modes()) {
        full_at = static_cast<int>(i) + 1;
        break;
      }
    json s;
    s["algo"] = to_string(block->algo);
    s["samples"] = rep.output.samples.size();
    s["modes_covered"] = a.covered;
    s["num_modes"] = mix.num_modes();
    s["full_coverage_at_sample"] = full_at >= 0 ? json(full_at) : json(nullptr);
    s["unassigned"] = a.unassigned;
    s["coverage_threshold"] = a.threshold;
    s["chi_square"] = chi_to_json(rep.chi_square);
    s["fgd"] = rep.fgd;
    s["fgd_ground_truth_reference"] = rep.fgd_reference;
    s["decorrelation_lag"] = decorrelation_lag(rep.autocorr, rep.output.samples.size());
    s["nfe"] = rep.output.ledger;
    if (!rep.classifier.is_null()) s["classifier"] = rep.classifier;
    manifest["diagnostics"][label] = s;
    manifest["timings"][label + "_seconds"] = rep.seconds;
    total += rep.output.ledger;
  }
  manifest["nfe"] = total;
  return dir.finish(std::move(manifest), t0);
}

GaussianBenchCell gaussian_bench_cell(const IntegratorSpec& spec, double s, int dim, double sigma_start,
                                      double sigma_end, const VESchedule& sched, std::uint64_t seed) {
  Rng rng(seed);
  const Vector x0 = std::sqrt(s * s + sigma_start * sigma_start) * normal_vector(rng, dim);
  const auto res = integrate(spec, {x0, sigma_start, sigma_end}, gaussian_score(s), sched, rng);
  GaussianBenchCell cell;
  cell.nfe = res.nfe;
  if (is_deterministic(spec.kind)) {
    const Vector exact = gaussian_ode_solution(s, x0, sigma_start, sigma_end);
    cell.error = (res.x_final - exact).norm() / exact.norm();
  } else {
    const double target = s * s + sigma_end * sigma_end;
    cell.error = std::abs(res.x_final.squaredNorm() / dim - target) / target;
  }
  return cell;
}

double richardson_order(const std::vector<int>& steps, const std::vector<double>& errors) {
  if (steps.size() != errors.size() || steps.size() < 2)
    throw std::invalid_argument("richardson_order: need at least two (steps, error) pairs");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(steps.size());
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] < 1 || !(errors[i] > 0.0)) throw std::invalid_argument("richardson_order: need steps >= 1, error > 0");
    xs.push_back(-std::log(static_cast<double>(steps[i])));
    ys.push_back(std::log(errors[i]));
    mx += xs.back() / n;
    my += ys.back() / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

json cmd_benchmark_integrators(const ExperimentConfig& cfg) {
  const auto& b = cfg.benchmark;
  if (b.integrators.empty()) throw ValidationError({"benchmark.integrators must list at least one integrator"});
  const auto t0 = Clock::now();
  const GaussianMixture mix = cfg.mixture();
  const VESchedule sched = cfg.schedule.schedule();
  const double sigma_min = cfg.schedule.sigma_min;
  OutputDir dir(cfg.output_dir);
  json manifest = base_manifest("benchmark-integrators", cfg);

  struct Cell {
    std::string name;
    IntegratorSpec spec;
    double sigma_start;
    int budget;  // 0 for rk45
    GaussianBenchCell gauss;
    double fgd = 0.0;
    double mog_nfe = 0.0;
  };
  std::vector<Cell> cells;
  for (IntegratorKind kind : b.integrators) {
    IntegratorSpec spec = cfg.integrator;
    spec.kind = kind;
    if (kind == IntegratorKind::kRk45) {
      for (double rtol : b.rk45_rtols)
        for (double s0 : b.sigma_starts) {
          spec.rtol = rtol;
          spec.atol = rtol;
          cells.push_back({"rk45_rtol" + format_double(rtol), spec, s0, 0, {}, 0.0, 0.0});
        }
    } else {
      for (int n : b.nfe)
        for (double s0 : b.sigma_starts) cells.push_back({std::string(to_string(kind)), with_budget(spec, n), s0, n, {}, 0.0, 0.0});
    }
  }

  const std::size_t mog_n = static_cast<std::size_t>(b.mog_samples);
  std::vector<Vector> mog_truth;
  {
    Rng rng = make_stream(cfg.seed, StreamTag::kGroundTruth, 0);
    for (std::size_t i = 0; i < mog_n; ++i) mog_truth.push_back(sample_smoothed(mix, sigma_min, rng));
  }
  const ScoreFn mog_score = make_score_fn(mix);

  parallel_for(static_cast<int>(cells.size()), cfg.threads, [&](int i) {
    Cell& c = cells[static_cast<std::size_t>(i)];
    const std::uint64_t cell_seed = seed_for(cfg.seed, static_cast<std::uint32_t>(StreamTag::kBenchmark),
                                             static_cast<std::uint32_t>(i));
    c.gauss = gaussian_bench_cell(c.spec, b.gaussian_s, b.gaussian_dim, c.sigma_start, sigma_min, sched, cell_seed);
    Rng rng(splitmix64(cell_seed));
    std::vector<Vector> xs;
    long nfe = 0;
    for (std::size_t k = 0; k < mog_n; ++k) {
      const Vector x0 = sample_smoothed(mix, c.sigma_start, rng);
      const auto res = integrate(c.spec, {x0, c.sigma_start, sigma_min}, mog_score, sched, rng);
      nfe += res.nfe;
      xs.push_back(res.x_final);
    }
    c.mog_nfe = static_cast<double>(nfe) / static_cast<double>(mog_n);
    c.fgd = frechet_gaussian_distance_auto(xs, mog_truth);
  });

  Csv gauss({"integrator", "sigma_start", "nfe", "error"});
  Csv mog({"integrator", "sigma_start", "nfe", "fgd"});
  for (const auto& c : cells) {
    gauss.row(c.name, c.sigma_start, c.gauss.nfe, c.gauss.error);
    mog.row(c.name, c.sigma_start, c.mog_nfe, c.fgd);
  }
  dir.write("bench_gaussian.csv", gauss.text());
  dir.write("bench_mog.csv", mog.text());

  // Truncation-interval comparison: every fixed budget, smallest vs largest start.
  json interval = json::array();
  if (b.sigma_starts.size() >= 2) {
    const double lo = *std::min_element(b.sigma_starts.begin(), b.sigma_starts.end());
    const double hi = *std::max_element(b.sigma_starts.begin(), b.sigma_starts.end());
    for (const auto& c : cells) {
      if (c.budget == 0 || c.sigma_start != lo) continue;
      for (const auto& o : cells)
        if (o.name == c.name && o.budget == c.budget && o.sigma_start == hi)
          interval.push_back({{"integrator", c.name},
                              {"nfe", c.budget},
                              {"error_short", c.gauss.error},
                              {"error_long", o.gauss.error},
                              {"short_is_smaller", c.gauss.error < o.gauss.error}});
    }
  }
  manifest["diagnostics"]["interval_comparison"] = interval;

  // Convergence orders on a short interval.
  Csv order({"integrator", "steps", "nfe", "error"});
  json orders = json::object();
  for (IntegratorKind kind : {IntegratorKind::kProbFlowEuler, IntegratorKind::kKarrasDet}) {
    IntegratorSpec spec = cfg.integrator;
    spec.kind = kind;
    std::vector<double> errs;
    for (int steps : b.order_steps) {
      spec.steps = steps;
      const auto cell = gaussian_bench_cell(spec, b.gaussian_s, b.gaussian_dim, b.order_sigma_start, b.order_sigma_end,
                                            sched, seed_for(cfg.seed, static_cast<std::uint32_t>(StreamTag::kBenchmark), 1u << 20));
      errs.push_back(cell.error);
      order.row(to_string(kind), steps, cell.nfe, cell.error);
    }
    orders[std::string(to_string(kind))] = richardson_order(b.order_steps, errs);
  }
  dir.write("order.csv", order.text());
  manifest["diagnostics"]["richardson_order"] = orders;

  // Adaptive solver against 256 Euler steps over the full range.
  {
    const double s0 = cfg.schedule.sigma_max;
    const std::uint64_t seed = seed_for(cfg.seed, static_cast<std::uint32_t>(StreamTag::kBenchmark), (1u << 20) + 1);
    IntegratorSpec euler = cfg.integrator;
    euler.kind = IntegratorKind::kProbFlowEuler;
    euler.steps = 256;
    const auto e = gaussian_bench_cell(euler, b.gaussian_s, b.gaussian_dim, s0, sigma_min, sched, seed);
    json rk = json::array();
    for (double rtol : b.rk45_rtols) {
      IntegratorSpec spec = cfg.integrator;
      spec.kind = IntegratorKind::kRk45;
      spec.rtol = spec.atol = rtol;
      const auto r = gaussian_bench_cell(spec, b.gaussian_s, b.gaussian_dim, s0, sigma_min, sched, seed);
      rk.push_back({{"rtol", rtol}, {"nfe", r.nfe}, {"error", r.error}});
    }
    manifest["diagnostics"]["rk45_vs_euler256"] = {
        {"sigma_start", s0}, {"euler_nfe", e.nfe}, {"euler_error", e.error}, {"rk45", rk}};
  }
  {
    const std::size_t m = mog_n;
    Rng r1 = make_stream(cfg.seed, StreamTag::kGroundTruth, 1), r2 = make_stream(cfg.seed, StreamTag::kGroundTruth, 2);
    std::vector<Vector> a, c;
    for (std::size_t i = 0; i < m; ++i) {
      a.push_back(sample_smoothed(mix, sigma_min, r1));
      c.push_back(sample_smoothed(mix, sigma_min, r2));
    }
    manifest["diagnostics"]["mog_fgd_ground_truth_reference"] = frechet_gaussian_distance_auto(a, c);
  }
  return dir.finish(std::move(manifest), t0);
}

std::pair<int, int> split_budget(int nfe, double nden_frac) {
  if (nfe < 2) throw std::invalid_argument("split_budget: need nfe >= 2");
  if (!(nden_frac > 0.0 && nden_frac <= 1.0)) throw std::invalid_argument("split_budget: nden_frac must lie in (0, 1]");
  const int n_den = std::clamp(static_cast<int>(std::lround(nden_frac * nfe)), 1, nfe - 1);
  return {n_den, nfe - n_den};
}

json cmd_ablation(const ExperimentConfig& cfg) {
  const auto& ab = cfg.ablation;
  std::vector<std::string> issues;
  if (ab.eta.empty() == ab.kappa.empty()) issues.push_back("ablation: give exactly one non-empty list of eta or kappa");
  if (cfg.sampler.algo != SamplerAlgo::kDlg) issues.push_back("ablation: sampler.algo must be dlg");
  if (!issues.empty()) throw ValidationError(issues);

  const auto t0 = Clock::now();
  const GaussianMixture mix = cfg.mixture();
  const int dim = mix.dim();
  OutputDir dir(cfg.output_dir);
  json manifest = base_manifest("ablation", cfg);

  json clf_report;
  const auto predictor = make_predictor(cfg.sampler.classifier, mix, cfg.schedule, cfg.seed, &clf_report);
  const ScoreFn score = make_score_fn(mix);
  const VESchedule sched = cfg.schedule.schedule();
  const bool by_kappa = !ab.kappa.empty();
  const auto& steps = by_kappa ? ab.kappa : ab.eta;

  std::vector<AblationCell> cells;
  for (double v : steps)
    for (double frac : ab.nden_frac)
      for (int n : ab.nfe) {
        AblationCell c;
        c.kappa = by_kappa ? v : 0.0;
        c.eta = by_kappa ? eta_from_kappa(v, dim) : v;
        c.nden_frac = frac;
        c.nfe = n;
        std::tie(c.n_den, c.n_skip) = split_budget(n, frac);
        cells.push_back(c);
      }

  const std::size_t samples =
      static_cast<std::size_t>(cfg.sampler.dlg.n_chains) * static_cast<std::size_t>(cfg.sampler.dlg.samples_per_chain);
  const auto truth = ground_truth_set(mix, reference_size(cfg, samples), cfg.seed, 0);

  parallel_for(static_cast<int>(cells.size()), cfg.threads, [&](int i) {
    AblationCell& c = cells[static_cast<std::size_t>(i)];
    DLGConfig d = cfg.sampler.dlg;
    d.eta.reset();
    d.kappa.reset();
    if (by_kappa) d.kappa = c.kappa;
    else d.eta = c.eta;
    d.n_den = c.n_den;
    d.n_skip = c.n_skip;
    if (cfg.sampler.start_mode) d.init.start_point = Vector(mix.mean(*cfg.sampler.start_mode));
    const auto out = dlg_run(score, *predictor, sched, cfg.integrator, d, dim, cfg.seed, 1);
    c.fgd = frechet_gaussian_distance_auto(out.samples, truth);
    c.avg_nfe = out.ledger.average_amortized();
  });

  Csv csv({"eta", "nden_frac", "nfe", "fgd", "kappa", "n_den", "n_skip", "avg_nfe"});
  json cell_list = json::array();
  for (const auto& c : cells) {
    csv.row(c.eta, c.nden_frac, c.nfe, c.fgd, c.kappa, c.n_den, c.n_skip, c.avg_nfe);
    cell_list.push_back({{"eta", c.eta}, {"kappa", c.kappa}, {"nden_frac", c.nden_frac}, {"nfe", c.nfe},
                         {"n_den", c.n_den}, {"n_skip", c.n_skip}, {"fgd", c.fgd}, {"avg_nfe", c.avg_nfe}});
  }
  dir.write("ablation.csv", csv.text());

  // Optimum per panel: (step size x fraction) at each NFE, (NFE x fraction) at each step
  // size, and the best fraction for every (step size, NFE) pair.
  auto best_of = [&](auto keep) {
    const AblationCell* best = nullptr;
    for (const auto& c : cells)
      if (keep(c) && (!best || c.fgd < best->fgd)) best = &c;
    return best;
  };
  auto cell_json = [](const AblationCell* c) {
    return json{{"eta", c->eta}, {"kappa", c->kappa}, {"nden_frac", c->nden_frac}, {"nfe", c->nfe}, {"fgd", c->fgd}};
  };
  json optima;
  optima["eta_vs_nden_frac"] = json::array();
  for (int n : ab.nfe) optima["eta_vs_nden_frac"].push_back(cell_json(best_of([&](const AblationCell& c) { return c.nfe == n; })));
  optima["nfe_vs_nden_frac"] = json::array();
  for (double v : steps)
    optima["nfe_vs_nden_frac"].push_back(
        cell_json(best_of([&](const AblationCell& c) { return (by_kappa ? c.kappa : c.eta) == v; })));
  optima["eta_vs_nfe"] = json::array();
  for (double v : steps)
    for (int n : ab.nfe)
      optima["eta_vs_nfe"].push_back(cell_json(
          best_of([&](const AblationCell& c) { return (by_kappa ? c.kappa : c.eta) == v && c.nfe == n; })));

  manifest["diagnostics"] = {{"cells", cell_list},
                             {"cell_count", cells.size()},
                             {"optima", optima},
                             {"classifier", clf_report},
                             {"fgd_ground_truth_reference",
                              frechet_gaussian_distance_auto(ground_truth_set(mix, truth.size(), cfg.seed, 1),
                                                             ground_truth_set(mix, truth.size(), cfg.seed, 2))}};
  return dir.finish(std::move(manifest), t0);
}

json cmd_train_classifier(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const GaussianMixture mix = cfg.mixture();
  OutputDir dir(cfg.output_dir);
  json manifest = base_manifest("train-classifier", cfg);

  const auto trained = train_noise_classifier(mix, cfg.schedule, cfg.classifier_training, cfg.seed);
  dir.write("classifier.json", trained.classifier->to_json().dump(2) + "\n");
  Csv loss({"epoch", "cross_entropy"});
  for (std::size_t e = 0; e < trained.report.loss_history.size(); ++e) loss.row(e + 1, trained.report.loss_history[e]);
  dir.write("training_loss.csv", loss.text());

  manifest["diagnostics"] = {{"feature_map", NoiseFeatureMap::kVersion},
                             {"levels", cfg.classifier_training.levels},
                             {"epochs", trained.report.epochs},
                             {"final_cross_entropy", trained.report.final_cross_entropy},
                             {"held_out_top1", trained.report.top1_accuracy},
                             {"held_out_within2", trained.report.within2_accuracy},
                             {"exact_agreement_within2", trained.exact_agreement}};
  return dir.finish(std::move(manifest), t0);
}

}  // namespace dmcmc
