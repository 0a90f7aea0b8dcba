#include "dmcmc/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>

namespace dmcmc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SamplerAlgo a) {
  switch (a) {
    case SamplerAlgo::kDlg: return "dlg";
    case SamplerAlgo::kLangevin: return "langevin";
    case SamplerAlgo::kAld: return "ald";
  }
  return "unknown";
}

namespace {

// Reads optional fields with defaults, recording type errors instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& issues) : issues_(issues) {}

  template <class T>
  T get(const json& obj, const std::string& key, T fallback, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      issues_.push_back(where + "." + key + " has the wrong type");
      return fallback;
    }
  }

  template <class T>
  std::optional<T> maybe(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      issues_.push_back(where + "." + key + " has the wrong type");
      return std::nullopt;
    }
  }

  void fail(std::string msg) { issues_.push_back(std::move(msg)); }

 private:
  std::vector<std::string>& issues_;
};

std::string resolve_path(const std::string& p, const std::string& base) {
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (fs::path(base) / path).lexically_normal().string();
}

IntegratorSpec parse_integrator(const json& j, Reader& r, const std::string& where) {
  IntegratorSpec spec;
  const auto name = r.get<std::string>(j, "name", "karras_det", where);
  try {
    spec.kind = integrator_from_string(name);
  } catch (const std::invalid_argument&) {
    r.fail(where + ".name: unknown integrator '" + name + "'");
  }
  spec.steps = r.get<int>(j, "steps", spec.steps, where);
  spec.rtol = r.get<double>(j, "rtol", spec.rtol, where);
  spec.atol = r.get<double>(j, "atol", spec.atol, where);
  spec.rho = r.get<double>(j, "rho", spec.rho, where);
  spec.churn = r.get<double>(j, "churn", spec.churn, where);
  spec.s_noise = r.get<double>(j, "s_noise", spec.s_noise, where);
  if (spec.steps < 1) r.fail(where + ".steps must be >= 1");
  if (!(spec.rtol > 0.0) || !(spec.atol > 0.0)) r.fail(where + ".rtol/atol must be > 0");
  if (!(spec.rho > 0.0)) r.fail(where + ".rho must be > 0");
  if (!(spec.churn >= 0.0)) r.fail(where + ".churn must be >= 0");
  if (!(spec.s_noise >= 0.0)) r.fail(where + ".s_noise must be >= 0");
  return spec;
}

TrainConfig parse_train(const json& j, Reader& r, const std::string& where) {
  TrainConfig t;
  t.epochs = r.get<int>(j, "epochs", t.epochs, where);
  t.lr = r.get<double>(j, "lr", t.lr, where);
  t.batch_size = r.get<int>(j, "batch_size", t.batch_size, where);
  t.seed = r.get<std::uint64_t>(j, "seed", t.seed, where);
  if (t.epochs < 0) r.fail(where + ".epochs must be >= 0");
  if (!(t.lr > 0.0)) r.fail(where + ".lr must be > 0");
  if (t.batch_size < 1) r.fail(where + ".batch_size must be >= 1");
  return t;
}

ClassifierTrainingConfig parse_training(const json& j, Reader& r, const std::string& where) {
  ClassifierTrainingConfig c;
  c.levels = r.get<int>(j, "M", c.levels, where);
  c.n_per_level = r.get<int>(j, "n_per_level", c.n_per_level, where);
  c.held_out_per_level = r.get<int>(j, "held_out_per_level", c.held_out_per_level, where);
  c.bands = r.get<int>(j, "bands", c.bands, where);
  c.codebook = r.get<int>(j, "codebook", c.codebook, where);
  const auto sampling = r.get<std::string>(j, "level_sampling", "prior", where);
  if (sampling == "prior") c.sampling = LevelSampling::kPrior;
  else if (sampling == "uniform") c.sampling = LevelSampling::kUniform;
  else r.fail(where + ".level_sampling must be 'prior' or 'uniform'");
  c.train = parse_train(j, r, where);
  if (c.levels < 2) r.fail(where + ".M must be >= 2");
  if (c.n_per_level < 1) r.fail(where + ".n_per_level must be >= 1");
  if (c.held_out_per_level < 0) r.fail(where + ".held_out_per_level must be >= 0");
  if (c.bands < 1) r.fail(where + ".bands must be >= 1");
  if (c.codebook < 0) r.fail(where + ".codebook must be >= 0");
  return c;
}

SamplerBlock parse_sampler(const json& j, Reader& r, const std::string& where, const std::string& base_dir,
                           int num_modes) {
  SamplerBlock b;
  if (!j.is_object()) {
    r.fail(where + " must be an object");
    return b;
  }
  const auto algo = r.get<std::string>(j, "algo", "dlg", where);
  if (algo == "dlg") b.algo = SamplerAlgo::kDlg;
  else if (algo == "langevin") b.algo = SamplerAlgo::kLangevin;
  else if (algo == "ald") b.algo = SamplerAlgo::kAld;
  else r.fail(where + ".algo must be one of dlg|ald|langevin");
  b.label = r.get<std::string>(j, "label", std::string(to_string(b.algo)), where);
  const bool label_ok = !b.label.empty() && std::all_of(b.label.begin(), b.label.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
  });
  if (!label_ok) r.fail(where + ".label may only contain letters, digits, '_' and '-'");

  const auto eta = r.maybe<double>(j, "eta", where);
  const auto kappa = r.maybe<double>(j, "kappa", where);
  const int n_chains = r.get<int>(j, "n_chains", 1, where);
  if (n_chains < 1) r.fail(where + ".n_chains must be >= 1");

  const json init = j.contains("init") ? j["init"] : json::object();
  const auto kind = r.get<std::string>(init, "kind", b.algo == SamplerAlgo::kDlg ? "integrate" : "noise",
                                       where + ".init");
  if (kind == "mode") {
    const int idx = r.get<int>(init, "mode_index", 0, where + ".init");
    if (idx < 0 || idx >= num_modes) r.fail(where + ".init.mode_index outside the mixture");
    b.start_mode = idx;
  } else if (kind != "integrate" && kind != "noise") {
    r.fail(where + ".init.kind must be one of integrate|noise|mode");
  }

  switch (b.algo) {
    case SamplerAlgo::kDlg: {
      auto& d = b.dlg;
      d.eta = eta;
      d.kappa = kappa;
      d.n_skip = r.get<int>(j, "n_skip", d.n_skip, where);
      d.n_den = r.get<int>(j, "n_den", d.n_den, where);
      d.n_chains = n_chains;
      d.samples_per_chain = r.get<int>(j, "samples_per_chain", d.samples_per_chain, where);
      const auto su = r.get<std::string>(j, "sigma_update", "argmax", where);
      try {
        d.sigma_update = sigma_update_from_string(su);
      } catch (const std::invalid_argument&) {
        r.fail(where + ".sigma_update must be argmax or sampled");
      }
      d.init.integrator_nfe = r.get<int>(init, "integrator_nfe", d.init.integrator_nfe, where + ".init");
      d.init.noise_var = r.get<double>(init, "noise_var", d.init.noise_var, where + ".init");
      d.init.gibbs_iters = r.get<int>(init, "gibbs_iters", d.init.gibbs_iters, where + ".init");
      for (auto& issue : d.validate()) r.fail(issue);

      const json cj = j.contains("classifier") ? j["classifier"] : json("exact");
      if (cj.is_string() && cj.get<std::string>() == "exact") {
        b.classifier.kind = ClassifierSource::Kind::kExact;
      } else if (cj.is_object() && cj.contains("path")) {
        b.classifier.kind = ClassifierSource::Kind::kFile;
        b.classifier.path = resolve_path(r.get<std::string>(cj, "path", "", where + ".classifier"), base_dir);
      } else if (cj.is_object() && cj.contains("train")) {
        b.classifier.kind = ClassifierSource::Kind::kTrain;
        b.classifier.training = parse_training(cj["train"], r, where + ".classifier.train");
      } else {
        r.fail(where + ".classifier must be \"exact\", {\"path\": ...} or {\"train\": {...}}");
      }
      break;
    }
    case SamplerAlgo::kLangevin: {
      auto& l = b.langevin;
      if (kappa) r.fail(where + ": langevin takes eta, not kappa");
      l.eta = eta.value_or(l.eta);
      l.level = r.get<int>(j, "level", l.level, where);
      l.n_chains = n_chains;
      l.steps = r.get<int>(j, "steps", l.steps, where);
      l.n_skip = r.get<int>(j, "n_skip", l.n_skip, where);
      l.denoise_output = r.get<bool>(j, "denoise_output", l.denoise_output, where);
      if (!(l.eta > 0.0)) r.fail(where + ".eta must be > 0");
      if (l.steps < 1) r.fail(where + ".steps must be >= 1");
      if (l.n_skip < 1) r.fail(where + ".n_skip must be >= 1");
      if (l.level < 0) r.fail(where + ".level must be >= 0");
      break;
    }
    case SamplerAlgo::kAld: {
      auto& a = b.ald;
      if (kappa) r.fail(where + ": ald takes eta, not kappa");
      a.eta = eta.value_or(a.eta);
      a.iters_per_level = r.get<int>(j, "iters_per_level", a.iters_per_level, where);
      a.n_chains = n_chains;
      a.denoise_output = r.get<bool>(j, "denoise_output", a.denoise_output, where);
      if (!(a.eta > 0.0)) r.fail(where + ".eta must be > 0");
      if (a.iters_per_level < 1) r.fail(where + ".iters_per_level must be >= 1");
      break;
    }
  }
  return b;
}

json sampler_to_json(const SamplerBlock& b) {
  json j;
  j["algo"] = to_string(b.algo);
  j["label"] = b.label;
  json init = json::object();
  if (b.start_mode) {
    init["kind"] = "mode";
    init["mode_index"] = *b.start_mode;
  } else {
    init["kind"] = b.algo == SamplerAlgo::kDlg ? "integrate" : "noise";
  }
  switch (b.algo) {
    case SamplerAlgo::kDlg: {
      const auto& d = b.dlg;
      if (d.eta) j["eta"] = *d.eta;
      if (d.kappa) j["kappa"] = *d.kappa;
      j["n_skip"] = d.n_skip;
      j["n_den"] = d.n_den;
      j["n_chains"] = d.n_chains;
      j["samples_per_chain"] = d.samples_per_chain;
      j["sigma_update"] = to_string(d.sigma_update);
      init["integrator_nfe"] = d.init.integrator_nfe;
      init["noise_var"] = d.init.noise_var;
      init["gibbs_iters"] = d.init.gibbs_iters;
      switch (b.classifier.kind) {
        case ClassifierSource::Kind::kExact: j["classifier"] = "exact"; break;
        case ClassifierSource::Kind::kFile: j["classifier"] = {{"path", b.classifier.path}}; break;
        case ClassifierSource::Kind::kTrain: {
          const auto& t = b.classifier.training;
          j["classifier"] = {{"train",
                              {{"M", t.levels},
                               {"n_per_level", t.n_per_level},
                               {"held_out_per_level", t.held_out_per_level},
                               {"bands", t.bands},
                               {"codebook", t.codebook},
                               {"level_sampling", t.sampling == LevelSampling::kPrior ? "prior" : "uniform"},
                               {"epochs", t.train.epochs},
                               {"lr", t.train.lr},
                               {"batch_size", t.train.batch_size},
                               {"seed", t.train.seed}}}};
          break;
        }
      }
      break;
    }
    case SamplerAlgo::kLangevin:
      j["eta"] = b.langevin.eta;
      j["level"] = b.langevin.level;
      j["n_chains"] = b.langevin.n_chains;
      j["steps"] = b.langevin.steps;
      j["n_skip"] = b.langevin.n_skip;
      j["denoise_output"] = b.langevin.denoise_output;
      break;
    case SamplerAlgo::kAld:
      j["eta"] = b.ald.eta;
      j["iters_per_level"] = b.ald.iters_per_level;
      j["n_chains"] = b.ald.n_chains;
      j["denoise_output"] = b.ald.denoise_output;
      break;
  }
  j["init"] = init;
  return j;
}

}  // namespace

nlohmann::json integrator_to_json(const IntegratorSpec& s) {
  return json{{"name", to_string(s.kind)}, {"steps", s.steps}, {"rtol", s.rtol},   {"atol", s.atol},
              {"rho", s.rho},              {"churn", s.churn}, {"s_noise", s.s_noise}};
}

ExperimentConfig parse_config(const nlohmann::json& input, const std::string& base_dir) {
  std::vector<std::string> issues;
  Reader r(issues);
  if (!input.is_object()) throw ValidationError({"config must be a JSON object"});
  // A manifest carries its resolved config under "config".
  const json& j = (input.contains("config") && input.contains("artifact_version")) ? input["config"] : input;

  ExperimentConfig cfg;
  cfg.output_dir = r.get<std::string>(j, "output_dir", cfg.output_dir, "config");
  cfg.seed = r.get<std::uint64_t>(j, "seed", cfg.seed, "config");
  cfg.threads = r.get<int>(j, "threads", cfg.threads, "config");
  if (cfg.threads < 1) r.fail("config.threads must be >= 1");

  // Mixture: inline {dim, modes}, {"benchmark": {...}}, or a file path.
  int num_modes = 0;
  int dim = 0;
  if (!j.contains("mixture")) {
    r.fail("config.mixture is required");
  } else {
    const json& m = j["mixture"];
    try {
      if (m.is_string()) {
        const auto path = resolve_path(m.get<std::string>(), base_dir);
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open mixture file " + path);
        cfg.mixture_json = json::parse(in);
      } else {
        cfg.mixture_json = m;
      }
      if (cfg.mixture_json.is_object() && cfg.mixture_json.contains("benchmark"))
        cfg.mixture_generator = benchmark_spec_from_json(cfg.mixture_json["benchmark"]);
      const GaussianMixture mix = cfg.mixture();
      num_modes = mix.num_modes();
      dim = mix.dim();
    } catch (const std::exception& e) {
      r.fail(std::string("config.mixture: ") + e.what());
    }
  }

  const json sched = j.contains("schedule") ? j["schedule"] : json::object();
  cfg.schedule.sigma_min = r.get<double>(sched, "sigma_min", cfg.schedule.sigma_min, "schedule");
  cfg.schedule.sigma_max = r.get<double>(sched, "sigma_max", cfg.schedule.sigma_max, "schedule");
  cfg.schedule.levels = r.get<int>(sched, "M", cfg.schedule.levels, "schedule");
  if (!(cfg.schedule.sigma_min > 0.0)) r.fail("schedule.sigma_min must be > 0");
  if (!(cfg.schedule.sigma_max > cfg.schedule.sigma_min)) r.fail("schedule.sigma_max must exceed sigma_min");
  if (cfg.schedule.levels < 2) r.fail("schedule.M must be >= 2");

  if (j.contains("sampler")) cfg.sampler = parse_sampler(j["sampler"], r, "sampler", base_dir, num_modes);
  else cfg.sampler = parse_sampler(json::object({{"eta", 1.0}}), r, "sampler", base_dir, num_modes);
  if (cfg.sampler.algo == SamplerAlgo::kLangevin && cfg.sampler.langevin.level >= cfg.schedule.levels)
    r.fail("sampler.level outside the grid");
  if (j.contains("baselines")) {
    if (!j["baselines"].is_array()) {
      r.fail("baselines must be an array");
    } else {
      int i = 0;
      for (const auto& b : j["baselines"]) {
        const std::string where = "baselines[" + std::to_string(i++) + "]";
        cfg.baselines.push_back(parse_sampler(b, r, where, base_dir, num_modes));
        if (cfg.baselines.back().algo == SamplerAlgo::kLangevin &&
            cfg.baselines.back().langevin.level >= cfg.schedule.levels)
          r.fail(where + ".level outside the grid");
      }
    }
  }

  {
    std::set<std::string> labels{cfg.sampler.label};
    for (const auto& b : cfg.baselines)
      if (!labels.insert(b.label).second) r.fail("sampler labels must be unique ('" + b.label + "' repeats)");
  }

  cfg.integrator = parse_integrator(j.contains("integrator") ? j["integrator"] : json::object(), r, "integrator");

  const json diag = j.contains("diagnostics") ? j["diagnostics"] : json::object();
  auto& d = cfg.diagnostics;
  d.threshold_multiple = r.get<double>(diag, "threshold_multiple", d.threshold_multiple, "diagnostics");
  d.max_lag = r.get<int>(diag, "max_lag", d.max_lag, "diagnostics");
  d.ground_truth_samples = r.get<int>(diag, "ground_truth_samples", d.ground_truth_samples, "diagnostics");
  d.raster_size = r.get<int>(diag, "raster_size", d.raster_size, "diagnostics");
  const auto ac = r.get<std::string>(diag, "autocorr", "pooled", "diagnostics");
  if (ac == "pooled") d.autocorr = AutocorrEstimator::kPooled;
  else if (ac == "per_class") d.autocorr = AutocorrEstimator::kPerClass;
  else r.fail("diagnostics.autocorr must be pooled or per_class");
  if (!(d.threshold_multiple > 0.0)) r.fail("diagnostics.threshold_multiple must be > 0");
  if (d.max_lag < 0) r.fail("diagnostics.max_lag must be >= 0");
  if (d.ground_truth_samples == 1 || d.ground_truth_samples < 0)
    r.fail("diagnostics.ground_truth_samples must be 0 (match the sample count) or >= 2");
  if (d.raster_size < 16) r.fail("diagnostics.raster_size must be >= 16");

  if (j.contains("benchmark")) {
    const json& bj = j["benchmark"];
    auto& b = cfg.benchmark;
    const auto names = r.get<std::vector<std::string>>(bj, "integrators", {}, "benchmark");
    for (const auto& n : names) {
      try {
        b.integrators.push_back(integrator_from_string(n));
      } catch (const std::invalid_argument&) {
        r.fail("benchmark.integrators: unknown integrator '" + n + "'");
      }
    }
    if (b.integrators.empty()) r.fail("benchmark.integrators must list at least one integrator");
    b.nfe = r.get<std::vector<int>>(bj, "nfe", b.nfe, "benchmark");
    b.sigma_starts = r.get<std::vector<double>>(bj, "sigma_starts", b.sigma_starts, "benchmark");
    b.rk45_rtols = r.get<std::vector<double>>(bj, "rk45_rtols", b.rk45_rtols, "benchmark");
    b.gaussian_s = r.get<double>(bj, "gaussian_s", b.gaussian_s, "benchmark");
    b.gaussian_dim = r.get<int>(bj, "gaussian_dim", b.gaussian_dim, "benchmark");
    b.mog_samples = r.get<int>(bj, "mog_samples", b.mog_samples, "benchmark");
    b.order_sigma_start = r.get<double>(bj, "order_sigma_start", b.order_sigma_start, "benchmark");
    b.order_sigma_end = r.get<double>(bj, "order_sigma_end", b.order_sigma_end, "benchmark");
    b.order_steps = r.get<std::vector<int>>(bj, "order_steps", b.order_steps, "benchmark");
    for (int n : b.nfe)
      if (n < 1) r.fail("benchmark.nfe entries must be >= 1");
    for (double s : b.sigma_starts)
      if (!(s >= cfg.schedule.sigma_min && s <= cfg.schedule.sigma_max))
        r.fail("benchmark.sigma_starts entries must lie in [sigma_min, sigma_max]");
    for (double t : b.rk45_rtols)
      if (!(t > 0.0)) r.fail("benchmark.rk45_rtols entries must be > 0");
    if (!(b.gaussian_s >= 0.0)) r.fail("benchmark.gaussian_s must be >= 0");
    if (b.gaussian_dim < 1) r.fail("benchmark.gaussian_dim must be >= 1");
    if (b.mog_samples < 2) r.fail("benchmark.mog_samples must be >= 2");
    if (!(b.order_sigma_end >= cfg.schedule.sigma_min && b.order_sigma_start > b.order_sigma_end &&
          b.order_sigma_start <= cfg.schedule.sigma_max))
      r.fail("benchmark.order_sigma_start/end must satisfy sigma_min <= end < start <= sigma_max");
    if (b.order_steps.size() < 2) r.fail("benchmark.order_steps needs at least two entries");
  }

  if (j.contains("ablation")) {
    const json& aj = j["ablation"];
    auto& a = cfg.ablation;
    a.eta = r.get<std::vector<double>>(aj, "eta", {}, "ablation");
    a.kappa = r.get<std::vector<double>>(aj, "kappa", {}, "ablation");
    a.nden_frac = r.get<std::vector<double>>(aj, "nden_frac", a.nden_frac, "ablation");
    a.nfe = r.get<std::vector<int>>(aj, "nfe", a.nfe, "ablation");
    if (a.eta.empty() == a.kappa.empty()) r.fail("ablation: give exactly one non-empty list of eta or kappa");
    for (double v : a.eta)
      if (!(v > 0.0)) r.fail("ablation.eta entries must be > 0");
    for (double v : a.kappa)
      if (!(v > 0.0)) r.fail("ablation.kappa entries must be > 0");
    if (a.nden_frac.empty()) r.fail("ablation.nden_frac must not be empty");
    for (double f : a.nden_frac)
      if (!(f > 0.0 && f <= 1.0)) r.fail("ablation.nden_frac entries must lie in (0, 1]");
    if (a.nfe.empty()) r.fail("ablation.nfe must not be empty");
    for (int n : a.nfe)
      if (n < 2) r.fail("ablation.nfe entries must be >= 2");
  }

  if (j.contains("classifier_training"))
    cfg.classifier_training = parse_training(j["classifier_training"], r, "classifier_training");

  if (dim > 0 && cfg.sampler.algo == SamplerAlgo::kDlg && cfg.sampler.dlg.kappa && !(*cfg.sampler.dlg.kappa > 0.0))
    r.fail("sampler.kappa must be > 0");

  if (!issues.empty()) throw ValidationError(std::move(issues));
  return cfg;
}

GaussianMixture ExperimentConfig::mixture() const {
  if (mixture_generator) return make_benchmark_mixture(*mixture_generator);
  return mixture_from_json(mixture_json);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"cannot open config file " + path});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("config is not valid JSON: ") + e.what()});
  }
  const auto base = fs::path(path).parent_path().string();
  return parse_config(j, base.empty() ? "." : base);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  if (cfg.mixture_generator) {
    json g;
    to_json(g, *cfg.mixture_generator);
    j["mixture"] = {{"benchmark", g}};
  } else {
    j["mixture"] = cfg.mixture_json;
  }
  j["schedule"] = {{"sigma_min", cfg.schedule.sigma_min}, {"sigma_max", cfg.schedule.sigma_max},
                   {"M", cfg.schedule.levels}};
  j["sampler"] = sampler_to_json(cfg.sampler);
  j["baselines"] = json::array();
  for (const auto& b : cfg.baselines) j["baselines"].push_back(sampler_to_json(b));
  j["integrator"] = integrator_to_json(cfg.integrator);
  const auto& d = cfg.diagnostics;
  j["diagnostics"] = {{"threshold_multiple", d.threshold_multiple},
                      {"max_lag", d.max_lag},
                      {"autocorr", d.autocorr == AutocorrEstimator::kPooled ? "pooled" : "per_class"},
                      {"ground_truth_samples", d.ground_truth_samples},
                      {"raster_size", d.raster_size}};
  const auto& b = cfg.benchmark;
  if (!b.integrators.empty()) {
    json names = json::array();
    for (auto k : b.integrators) names.push_back(to_string(k));
    j["benchmark"] = {{"integrators", names},
                      {"nfe", b.nfe},
                      {"sigma_starts", b.sigma_starts},
                      {"rk45_rtols", b.rk45_rtols},
                      {"gaussian_s", b.gaussian_s},
                      {"gaussian_dim", b.gaussian_dim},
                      {"mog_samples", b.mog_samples},
                      {"order_sigma_start", b.order_sigma_start},
                      {"order_sigma_end", b.order_sigma_end},
                      {"order_steps", b.order_steps}};
  }
  const auto& a = cfg.ablation;
  if (!a.eta.empty() || !a.kappa.empty()) {
    j["ablation"] = {{"nden_frac", a.nden_frac}, {"nfe", a.nfe}};
    if (!a.eta.empty()) j["ablation"]["eta"] = a.eta;
    if (!a.kappa.empty()) j["ablation"]["kappa"] = a.kappa;
  }
  const auto& t = cfg.classifier_training;
  j["classifier_training"] = {{"M", t.levels},
                              {"n_per_level", t.n_per_level},
                              {"held_out_per_level", t.held_out_per_level},
                              {"bands", t.bands},
                              {"codebook", t.codebook},
                              {"level_sampling", t.sampling == LevelSampling::kPrior ? "prior" : "uniform"},
                              {"epochs", t.train.epochs},
                              {"lr", t.train.lr},
                              {"batch_size", t.train.batch_size},
                              {"seed", t.train.seed}};
  return j;
}

}  // namespace dmcmc
