// Command-line front end: data generation, training, evaluation, the
// normalizer fit, metric surfaces, the omega sweep, and the invariant suite.
//
// Configuration is a flat key=value text file (--config PATH); every key is
// also a command-line flag of the same name, and flags win over the file.
// Unknown config keys are rejected. Exit codes: 2 config/usage errors,
// 3 numerical failures, 4 assertion (validation) failures.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "pdml/directional.hpp"
#include "pdml/io.hpp"
#include "pdml/losses.hpp"
#include "pdml/metrics.hpp"
#include "pdml/specfn.hpp"
#include "pdml/synthdata.hpp"
#include "pdml/trainer.hpp"
#include "pdml/validation.hpp"

namespace fs = std::filesystem;
using pdml::io::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One flat bag of typed keys; each key doubles as a CLI flag.
class RunConfig {
 public:
  void add_int(CLI::App* app, const std::string& key, int* field,
               const std::string& help) {
    options_[key].push_back(app->add_option("--" + key, *field, help));
    setters_[key] = [field](const std::string& v) { *field = std::stoi(v); };
    getters_[key] = [field] { return std::to_string(*field); };
  }
  void add_double(CLI::App* app, const std::string& key, double* field,
                  const std::string& help) {
    options_[key].push_back(app->add_option("--" + key, *field, help));
    setters_[key] = [field](const std::string& v) { *field = std::stod(v); };
    getters_[key] = [field] { return pdml::io::format_double(*field); };
  }
  void add_u64(CLI::App* app, const std::string& key, std::uint64_t* field,
               const std::string& help) {
    options_[key].push_back(app->add_option("--" + key, *field, help));
    setters_[key] = [field](const std::string& v) { *field = std::stoull(v); };
    getters_[key] = [field] { return std::to_string(*field); };
  }
  void add_string(CLI::App* app, const std::string& key, std::string* field,
                  const std::string& help) {
    options_[key].push_back(app->add_option("--" + key, *field, help));
    setters_[key] = [field](const std::string& v) { *field = v; };
    getters_[key] = [field] { return *field; };
  }
  void add_bool(CLI::App* app, const std::string& key, bool* field,
                const std::string& help) {
    options_[key].push_back(app->add_flag("--" + key, *field, help));
    setters_[key] = [field](const std::string& v) {
      *field = v == "1" || v == "true";
    };
    getters_[key] = [field] { return *field ? "1" : "0"; };
  }

  // Applies a key=value file; command-line flags keep precedence.
  void apply_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string trimmed;
      for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c)) || !trimmed.empty()) {
          trimmed.push_back(c);
        }
      }
      while (!trimmed.empty() &&
             std::isspace(static_cast<unsigned char>(trimmed.back()))) {
        trimmed.pop_back();
      }
      if (trimmed.empty() || trimmed[0] == '#') continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected key=value");
      }
      const std::string key = trimmed.substr(0, eq);
      const std::string value = trimmed.substr(eq + 1);
      const auto it = setters_.find(key);
      if (it == setters_.end()) {
        throw ConfigError("unknown config key: " + key);
      }
      bool given_on_cli = false;
      for (const CLI::Option* opt : options_.at(key)) {
        given_on_cli = given_on_cli || opt->count() > 0;
      }
      if (given_on_cli) continue;  // flag overrides file
      try {
        it->second(value);
      } catch (const std::exception&) {
        throw ConfigError("bad value for config key " + key + ": '" + value +
                          "'");
      }
    }
  }

  std::map<std::string, std::string> snapshot() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, get] : getters_) out[k] = get();
    return out;
  }

 private:
  std::map<std::string, std::vector<CLI::Option*>> options_;
  std::map<std::string, std::function<void(const std::string&)>> setters_;
  std::map<std::string, std::function<std::string()>> getters_;
};

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

// Keys shared by gen-data / train / eval / sweep-omega.
struct CommonKeys {
  // data generation
  int dims = 16, classes = 8, samples_per_class = 150, feature_dim = 16;
  double kappa_min = 3.0, kappa_max = 90.0;
  double ambiguity_fraction = 0.0, ambiguity_multiplier = 0.2;
  std::uint64_t data_seed = 0;
  // training
  int epochs = 200, batch_size = 64;
  double lr = 1e-2, weight_decay = 1e-4, beta1 = 0.9, beta2 = 0.999,
         adam_eps = 1e-8;
  double temperature = 1.0, omega = 0.0;
  int mc_samples = 5;
  std::string metric = "cos", normalizer = "approx", placement = "per_sample";
  std::string encoder = "identity";
  int embed_dim = 0;
  double encoder_init_scale = 1.0, kappa_init = 50.0;
  bool learn_temperature = false;
  int lr_decay_epoch = -1;
  double lr_decay_factor = 0.1;
  double norm_fit_kmin = 1.0, norm_fit_kmax = 120.0;
  std::uint64_t seed = 0;
  bool record_steps = false;
  // evaluation
  std::string recall_k = "1,2,4";
  int map_r = 1000;
  std::string retrieval = "cosine";
  int hist_bins = 20;
  // output
  std::string out;
};

void add_data_keys(CLI::App* app, RunConfig& rc, CommonKeys& k) {
  rc.add_int(app, "dims", &k.dims, "generator sphere dimension M");
  rc.add_int(app, "classes", &k.classes, "number of classes");
  rc.add_int(app, "samples_per_class", &k.samples_per_class,
             "points per class (before the 50/50 split)");
  rc.add_int(app, "feature_dim", &k.feature_dim,
             "feature dimension F (>= dims; == dims keeps identity lift)");
  rc.add_double(app, "kappa_min", &k.kappa_min, "per-dim concentration low end");
  rc.add_double(app, "kappa_max", &k.kappa_max, "per-dim concentration high end");
  rc.add_double(app, "ambiguity_fraction", &k.ambiguity_fraction,
                "fraction of ambiguous points per class");
  rc.add_double(app, "ambiguity_multiplier", &k.ambiguity_multiplier,
                "concentration multiplier (< 1) for ambiguous points");
  rc.add_u64(app, "data_seed", &k.data_seed, "generator seed");
}

void add_train_keys(CLI::App* app, RunConfig& rc, CommonKeys& k) {
  rc.add_int(app, "epochs", &k.epochs, "training epochs");
  rc.add_int(app, "batch_size", &k.batch_size, "minibatch size");
  rc.add_double(app, "lr", &k.lr, "learning rate");
  rc.add_double(app, "weight_decay", &k.weight_decay, "decoupled weight decay");
  rc.add_double(app, "beta1", &k.beta1, "first-moment decay");
  rc.add_double(app, "beta2", &k.beta2, "second-moment decay");
  rc.add_double(app, "adam_eps", &k.adam_eps, "optimizer numerical floor");
  rc.add_double(app, "temperature", &k.temperature, "softmax temperature t");
  rc.add_double(app, "omega", &k.omega, "auxiliary loss scale");
  rc.add_int(app, "mc_samples", &k.mc_samples, "Monte-Carlo samples N");
  rc.add_string(app, "metric", &k.metric,
                "cos|l2|nivmf_point|el_nivmf|el_vmf|b_vmf|kl_vmf");
  rc.add_string(app, "normalizer", &k.normalizer, "exact|approx");
  rc.add_string(app, "placement", &k.placement,
                "temperature placement: per_sample|per_distance");
  rc.add_string(app, "encoder", &k.encoder, "identity|linear");
  rc.add_int(app, "embed_dim", &k.embed_dim,
             "linear encoder output dim (0: generator dims)");
  rc.add_double(app, "encoder_init_scale", &k.encoder_init_scale,
                "scale of the random encoder init");
  rc.add_double(app, "kappa_init", &k.kappa_init, "initial proxy concentration");
  rc.add_bool(app, "learn_temperature", &k.learn_temperature,
              "train t jointly instead of keeping it fixed");
  rc.add_int(app, "lr_decay_epoch", &k.lr_decay_epoch,
             "epoch of the single step decay (-1: none)");
  rc.add_double(app, "lr_decay_factor", &k.lr_decay_factor, "step decay factor");
  rc.add_double(app, "norm_fit_kmin", &k.norm_fit_kmin,
                "approx normalizer fit range low end");
  rc.add_double(app, "norm_fit_kmax", &k.norm_fit_kmax,
                "approx normalizer fit range high end");
  rc.add_u64(app, "seed", &k.seed, "training seed");
  rc.add_bool(app, "record_steps", &k.record_steps,
              "also write a per-step loss/gradient trace CSV");
}

void add_eval_keys(CLI::App* app, RunConfig& rc, CommonKeys& k) {
  rc.add_string(app, "recall_k", &k.recall_k, "comma list of recall cutoffs");
  rc.add_int(app, "map_r", &k.map_r, "mAP truncation R");
  rc.add_string(app, "retrieval", &k.retrieval, "cosine|euclidean");
  rc.add_int(app, "hist_bins", &k.hist_bins, "norm histogram bins");
}

pdml::SyntheticConfig to_synth_config(const CommonKeys& k) {
  pdml::SyntheticConfig cfg;
  cfg.dims = k.dims;
  cfg.classes = k.classes;
  cfg.samples_per_class = k.samples_per_class;
  cfg.feature_dim = k.feature_dim;
  cfg.kappa_min = k.kappa_min;
  cfg.kappa_max = k.kappa_max;
  cfg.ambiguity_fraction = k.ambiguity_fraction;
  cfg.ambiguity_multiplier = k.ambiguity_multiplier;
  cfg.seed = k.data_seed;
  return cfg;
}

pdml::TrainConfig to_train_config(const CommonKeys& k) {
  pdml::TrainConfig cfg;
  cfg.epochs = k.epochs;
  cfg.batch_size = k.batch_size;
  cfg.lr = k.lr;
  cfg.weight_decay = k.weight_decay;
  cfg.beta1 = k.beta1;
  cfg.beta2 = k.beta2;
  cfg.adam_eps = k.adam_eps;
  cfg.loss.temperature = k.temperature;
  cfg.loss.omega = k.omega;
  cfg.loss.mc_samples = k.mc_samples;
  cfg.loss.metric.tag = pdml::metric_tag_from_string(k.metric);
  cfg.loss.metric.mc_samples = k.mc_samples;
  cfg.loss.metric.normalizer = k.normalizer == "exact"
                                   ? pdml::NormalizerKind::kExact
                                   : pdml::NormalizerKind::kApprox;
  if (k.normalizer != "exact" && k.normalizer != "approx") {
    throw ConfigError("normalizer must be exact|approx");
  }
  if (k.placement == "per_sample") {
    cfg.loss.placement = pdml::TemperaturePlacement::kPerSample;
  } else if (k.placement == "per_distance") {
    cfg.loss.placement = pdml::TemperaturePlacement::kPerDistance;
  } else {
    throw ConfigError("placement must be per_sample|per_distance");
  }
  cfg.encoder = pdml::encoder_mode_from_string(k.encoder);
  cfg.embed_dim = k.embed_dim;
  cfg.encoder_init_scale = k.encoder_init_scale;
  cfg.kappa_init = k.kappa_init;
  cfg.learn_temperature = k.learn_temperature;
  cfg.lr_decay_epoch = k.lr_decay_epoch;
  cfg.lr_decay_factor = k.lr_decay_factor;
  cfg.norm_fit_kmin = k.norm_fit_kmin;
  cfg.norm_fit_kmax = k.norm_fit_kmax;
  cfg.seed = k.seed;
  cfg.record_step_traces = k.record_steps;
  return cfg;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stoi(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

// "lo:hi:count" inclusive linear range.
std::vector<double> parse_range(const std::string& s) {
  const auto c1 = s.find(':');
  const auto c2 = s.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos) {
    throw ConfigError("range must be lo:hi:count, got '" + s + "'");
  }
  const double lo = std::stod(s.substr(0, c1));
  const double hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
  const int n = std::stoi(s.substr(c2 + 1));
  if (n < 1) throw ConfigError("range count must be >= 1");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1.0));
  }
  return out;
}

struct LoadedData {
  pdml::LabeledDataset train;
  pdml::LabeledDataset test;
};

LoadedData load_data_dir(const fs::path& dir) {
  LoadedData d;
  d.train = pdml::io::read_dataset_csv(dir / "train.csv");
  d.test = pdml::io::read_dataset_csv(dir / "test.csv");
  if (fs::exists(dir / "spec.json")) {
    auto spec = std::make_shared<const pdml::SyntheticSpec>(
        pdml::io::read_spec_json(dir / "spec.json"));
    d.train.spec = spec;
    d.test.spec = spec;
  }
  if (fs::exists(dir / "train_flags.csv")) {
    d.train.ambiguous = pdml::io::read_flags_csv(dir / "train_flags.csv");
  }
  if (fs::exists(dir / "test_flags.csv")) {
    d.test.ambiguous = pdml::io::read_flags_csv(dir / "test_flags.csv");
  }
  return d;
}

int run_fit_normalizer(int dim, double kmin, double kmax, int points,
                       const std::string& preset, const std::string& out,
                       const std::map<std::string, std::string>& cfg_snapshot) {
  Timer timer;
  pdml::QuadraticNormalizerFit fit;
  if (!preset.empty()) {
    if (preset == "paper-128") {
      fit = pdml::published_normalizer_fit(128);
    } else if (preset == "paper-512") {
      fit = pdml::published_normalizer_fit(512);
    } else {
      throw ConfigError("unknown preset: " + preset +
                        " (expected paper-128|paper-512)");
    }
  } else {
    if (points < 3) throw ConfigError("need >= 3 grid points");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) {
      grid[i] = points == 1 ? kmin : kmin + (kmax - kmin) * i / (points - 1.0);
    }
    fit = pdml::fit_log_c_quadratic(dim, grid);
  }
  const json j = pdml::io::fit_to_json(fit);
  std::cout << j.dump(2) << std::endl;
  if (!out.empty()) {
    const fs::path dir(out);
    fs::create_directories(dir);
    std::ofstream(dir / "fit.json") << j.dump(2) << '\n';
    pdml::io::write_manifest(dir / "manifest.json", "fit-normalizer", {},
                             {(dir / "fit.json").string()}, 0,
                             pdml::io::config_hash(cfg_snapshot),
                             timer.seconds());
  }
  return 0;
}

int run_validate() {
  const auto results = pdml::run_validation_suite();
  std::map<std::string, std::pair<int, int>> per_suite;  // pass, total
  bool all_pass = true;
  for (const auto& r : results) {
    auto& [pass, total] = per_suite[r.suite];
    ++total;
    if (r.pass) {
      ++pass;
    } else {
      all_pass = false;
    }
    std::printf("[%s] %-60s %s%s%s\n", r.pass ? "PASS" : "FAIL",
                (r.suite + ": " + r.name).c_str(),
                r.detail.empty() ? "" : "(", r.detail.c_str(),
                r.detail.empty() ? "" : ")");
  }
  std::printf("----\n");
  for (const auto& [suite, counts] : per_suite) {
    std::printf("%-12s %d/%d passed\n", suite.c_str(), counts.first,
                counts.second);
  }
  return all_pass ? 0 : 4;
}

int run_gen_data(const CommonKeys& k, const RunConfig& rc) {
  Timer timer;
  if (k.out.empty()) throw ConfigError("gen-data requires --out");
  const auto spec = pdml::SyntheticSpec::materialize(to_synth_config(k));
  const auto data = pdml::generate(spec);
  const fs::path dir(k.out);
  pdml::io::write_dataset_csv(dir / "train.csv", data.train);
  pdml::io::write_dataset_csv(dir / "test.csv", data.test);
  pdml::io::write_flags_csv(dir / "train_flags.csv", data.train);
  pdml::io::write_flags_csv(dir / "test_flags.csv", data.test);
  pdml::io::write_spec_json(dir / "spec.json", spec);
  pdml::io::write_manifest(
      dir / "manifest.json", "gen-data", {},
      {"train.csv", "test.csv", "train_flags.csv", "test_flags.csv",
       "spec.json"},
      k.data_seed, pdml::io::config_hash(rc.snapshot()), timer.seconds());
  std::printf("wrote %lld train / %lld test samples to %s\n",
              static_cast<long long>(data.train.size()),
              static_cast<long long>(data.test.size()), dir.string().c_str());
  return 0;
}

int run_train(const std::string& data_dir, const CommonKeys& k,
              const RunConfig& rc) {
  Timer timer;
  if (k.out.empty()) throw ConfigError("train requires --out");
  if (data_dir.empty()) throw ConfigError("train requires --data");
  const auto data = load_data_dir(data_dir);
  const auto cfg = to_train_config(k);
  const auto result = pdml::train(data.train, data.test, cfg);
  const fs::path dir(k.out);
  const auto snapshot = rc.snapshot();
  const std::string hash = pdml::io::config_hash(snapshot);
  pdml::io::write_checkpoint(dir / "checkpoint.json", result.state, snapshot,
                             hash);
  pdml::io::write_epoch_log_csv(dir / "metrics.csv", result.epochs);
  std::vector<std::string> outputs{"checkpoint.json", "metrics.csv"};
  if (cfg.record_step_traces) {
    pdml::io::write_step_trace_csv(dir / "steps.csv", result.steps);
    outputs.push_back("steps.csv");
  }
  pdml::io::write_manifest(dir / "manifest.json", "train", {data_dir}, outputs,
                           k.seed, hash, timer.seconds());
  if (!result.epochs.empty()) {
    const auto& last = result.epochs.back();
    std::printf("final: loss=%.6f recall1=%.4f map=%.4f mean_kappa=%.3f\n",
                last.loss, last.recall1, last.map, last.mean_kappa);
  }
  return 0;
}

int run_eval(const std::string& data_dir, const std::string& checkpoint_path,
             const CommonKeys& k, const RunConfig& rc) {
  Timer timer;
  if (k.out.empty()) throw ConfigError("eval requires --out");
  if (data_dir.empty() || checkpoint_path.empty()) {
    throw ConfigError("eval requires --data and --checkpoint");
  }
  const auto data = load_data_dir(data_dir);
  const auto ck = pdml::io::read_checkpoint(checkpoint_path);

  pdml::TrainState state(ck.to_bank());
  state.encoder = ck.encoder;
  const pdml::Matrix emb = pdml::embed(state, data.test.features);

  const auto metric = pdml::retrieval_metric_from_string(k.retrieval);
  const auto report = pdml::retrieval_report(emb, data.test.labels,
                                             parse_int_list(k.recall_k),
                                             k.map_r, metric);
  const auto diversity = pdml::diversity_metrics(emb, data.test.labels);

  // Norm histogram split by retrieval correctness at K = 1.
  std::vector<int> correct(data.test.labels.size(), 0);
  {
    const pdml::Matrix unit = [&] {
      pdml::Matrix u = emb;
      for (pdml::Index i = 0; i < u.rows(); ++i) u.row(i).normalize();
      return u;
    }();
    for (pdml::Index q = 0; q < unit.rows(); ++q) {
      double best = -2.0;
      pdml::Index best_i = -1;
      for (pdml::Index i = 0; i < unit.rows(); ++i) {
        if (i == q) continue;
        const double s = unit.row(q).dot(unit.row(i));
        if (s > best) {
          best = s;
          best_i = i;
        }
      }
      correct[q] = data.test.labels[best_i] == data.test.labels[q] ? 1 : 0;
    }
  }
  const auto hist = pdml::norm_histogram(emb, correct, k.hist_bins);

  const auto snapshot = rc.snapshot();
  const std::string hash = pdml::io::config_hash(snapshot);
  const fs::path run_dir = fs::path(k.out) / ("run-" + hash.substr(0, 8));
  pdml::io::write_report_json(run_dir / "report.json", report, diversity, hash);
  pdml::io::write_norm_histogram_csv(run_dir / "norm_hist.csv", hist);
  std::vector<std::string> outputs{"report.json", "norm_hist.csv"};
  if (!data.test.ambiguous.empty()) {
    std::vector<int> amb_groups(data.test.ambiguous.size());
    for (std::size_t i = 0; i < amb_groups.size(); ++i) {
      amb_groups[i] = data.test.ambiguous[i] ? 1 : 0;
    }
    pdml::io::write_norm_histogram_csv(
        run_dir / "norm_hist_ambiguity.csv",
        pdml::norm_histogram(emb, amb_groups, k.hist_bins));
    outputs.push_back("norm_hist_ambiguity.csv");
  }
  pdml::io::write_manifest(run_dir / "manifest.json", "eval",
                           {data_dir, checkpoint_path}, outputs, k.seed, hash,
                           timer.seconds());
  std::printf("recall@1=%.4f map@%d=%.4f (%s) -> %s\n",
              report.recall_at.count(1) ? report.recall_at.at(1) : 0.0, k.map_r,
              report.map_at_r, k.retrieval.c_str(), run_dir.string().c_str());
  return 0;
}

int run_metric_surface(const std::string& metric_name,
                       const std::string& kappa_p_str,
                       const std::string& kappa_z_range,
                       const std::string& angle_range, int dim, int mc_samples,
                       std::uint64_t seed, const std::string& normalizer,
                       const std::string& out,
                       const std::map<std::string, std::string>& cfg_snapshot) {
  Timer timer;
  if (out.empty()) throw ConfigError("metric-surface requires --out");
  const auto tag = pdml::metric_tag_from_string(metric_name);
  const auto kappas_p = parse_double_list(kappa_p_str);
  const auto kappa_zs = parse_range(kappa_z_range);
  const auto angles = parse_range(angle_range);
  if (dim < 2) throw ConfigError("dim must be >= 2");

  const pdml::NormalizerBackend backend =
      normalizer == "exact" ? pdml::NormalizerBackend::exact()
                            : pdml::NormalizerBackend::approx_default(dim);

  pdml::Vector e1 = pdml::Vector::Zero(dim);
  e1(0) = 1.0;
  const pdml::UnitVector mu_p{e1};
  pdml::Vector kdiag(dim);
  if (static_cast<int>(kappas_p.size()) == dim) {
    for (int i = 0; i < dim; ++i) kdiag(i) = kappas_p[i];
  } else if (kappas_p.size() == 1) {
    kdiag.setConstant(kappas_p[0]);
  } else {
    throw ConfigError("kappa-p must have 1 or dim entries");
  }

  std::vector<std::vector<double>> rows;
  for (double angle : angles) {
    const double rad = angle * M_PI / 180.0;
    pdml::Vector dir = pdml::Vector::Zero(dim);
    dir(0) = std::cos(rad);
    dir(1) = std::sin(rad);
    for (double kz : kappa_zs) {
      const pdml::EmbeddingDecomposition sample(kz * dir);
      double d = 0.0;
      switch (tag) {
        case pdml::MetricTag::kCos:
          d = pdml::d_cos(mu_p, sample);
          break;
        case pdml::MetricTag::kL2:
          d = pdml::d_l2(pdml::VmfParams(mu_p, kappas_p[0]), sample);
          break;
        case pdml::MetricTag::kNivmfPoint:
          d = pdml::d_nivmf_point(pdml::NivmfParams(mu_p, kdiag), sample,
                                  backend);
          break;
        case pdml::MetricTag::kElNivmf:
          d = pdml::d_el_nivmf(pdml::NivmfParams(mu_p, kdiag), sample,
                               mc_samples, seed, backend);
          break;
        case pdml::MetricTag::kElVmf:
          d = pdml::d_el_vmf(pdml::VmfParams(mu_p, kappas_p[0]), sample,
                             backend);
          break;
        case pdml::MetricTag::kBVmf:
          d = pdml::d_b_vmf(pdml::VmfParams(mu_p, kappas_p[0]), sample,
                            backend);
          break;
        case pdml::MetricTag::kKlVmf:
          d = pdml::d_kl_vmf(pdml::VmfParams(mu_p, kappas_p[0]), sample,
                             backend);
          break;
      }
      rows.push_back({angle, kz, d});
    }
  }
  const fs::path out_path(out);
  pdml::io::write_csv(out_path, {"angle", "kappa_z", "distance"}, rows);
  pdml::io::write_manifest(out_path.parent_path() / "manifest.json",
                           "metric-surface", {}, {out_path.filename().string()},
                           seed, pdml::io::config_hash(cfg_snapshot),
                           timer.seconds());
  return 0;
}

int run_sweep_omega(const std::string& data_dir, const std::string& grid,
                    const CommonKeys& k, const RunConfig& rc) {
  Timer timer;
  if (k.out.empty()) throw ConfigError("sweep-omega requires --out");
  if (data_dir.empty()) throw ConfigError("sweep-omega requires --data");
  const auto omegas = parse_double_list(grid);
  if (omegas.empty()) throw ConfigError("empty omega grid");
  const auto data = load_data_dir(data_dir);

  std::vector<std::vector<double>> rows;
  for (double omega : omegas) {
    CommonKeys kw = k;
    kw.omega = omega;
    const auto cfg = to_train_config(kw);
    const auto result = pdml::train(data.train, data.test, cfg);
    const pdml::Matrix emb = pdml::embed(result.state, data.test.features);
    const double r1 = pdml::recall_at_k(emb, data.test.labels, 1,
                                        pdml::RetrievalMetric::kCosine);
    rows.push_back({omega, r1});
    std::printf("omega=%g -> recall1=%.4f\n", omega, r1);
  }
  const fs::path dir(k.out);
  pdml::io::write_csv(dir / "omega_sweep.csv", {"omega", "recall1"}, rows);
  pdml::io::write_manifest(dir / "manifest.json", "sweep-omega", {data_dir},
                           {"omega_sweep.csv"}, k.seed,
                           pdml::io::config_hash(rc.snapshot()),
                           timer.seconds());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic proxy-based metric learning toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "flat key=value config file")
      ->expected(1);
  // Let --config (a parent option) appear after the subcommand name.
  app.fallthrough();

  RunConfig rc;
  CommonKeys keys;

  // fit-normalizer
  auto* fit_cmd = app.add_subcommand("fit-normalizer",
                                     "fit the quadratic log-normalizer model");
  int fit_dim = 128, fit_points = 41;
  double fit_kmin = 10.0, fit_kmax = 50.0;
  std::string fit_preset;
  std::string fit_out;
  fit_cmd->add_option("--dim", fit_dim, "embedding dimension M");
  fit_cmd->add_option("--kmin", fit_kmin, "grid low end");
  fit_cmd->add_option("--kmax", fit_kmax, "grid high end");
  fit_cmd->add_option("--points", fit_points, "grid points");
  fit_cmd->add_option("--preset", fit_preset,
                      "load reference coefficients: paper-128|paper-512");
  fit_cmd->add_option("--out", fit_out, "optional output directory");

  // validate
  auto* validate_cmd =
      app.add_subcommand("validate", "run every module's invariant suite");

  // gen-data
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_data_keys(gen_cmd, rc, keys);
  rc.add_string(gen_cmd, "out", &keys.out, "output directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "train proxies (and encoder)");
  std::string train_data;
  train_cmd->add_option("--data", train_data, "dataset directory (gen-data)");
  add_train_keys(train_cmd, rc, keys);
  rc.add_string(train_cmd, "out", &keys.out, "output directory");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_checkpoint;
  eval_cmd->add_option("--data", eval_data, "dataset directory");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON");
  add_eval_keys(eval_cmd, rc, keys);
  rc.add_string(eval_cmd, "out", &keys.out, "output directory");

  // metric-surface
  auto* surf_cmd = app.add_subcommand(
      "metric-surface", "export a distance surface over (angle, kappa_z)");
  std::string surf_metric = "b_vmf", surf_kappa_p = "10",
              surf_kz = "1:50:25", surf_angle = "0:180:37",
              surf_normalizer = "exact", surf_out;
  int surf_dim = 3, surf_mc = 5;
  std::uint64_t surf_seed = 0;
  surf_cmd->add_option("--metric", surf_metric, "metric tag");
  surf_cmd->add_option("--kappa-p", surf_kappa_p,
                       "proxy concentration (scalar or comma list)");
  surf_cmd->add_option("--kappa-z-range", surf_kz, "lo:hi:count");
  surf_cmd->add_option("--angle-range", surf_angle, "degrees, lo:hi:count");
  surf_cmd->add_option("--dim", surf_dim, "dimension");
  surf_cmd->add_option("--mc-samples", surf_mc, "Monte-Carlo samples");
  surf_cmd->add_option("--seed", surf_seed, "Monte-Carlo seed");
  surf_cmd->add_option("--normalizer", surf_normalizer, "exact|approx");
  surf_cmd->add_option("--out", surf_out, "output CSV path");

  // sweep-omega
  auto* sweep_cmd = app.add_subcommand(
      "sweep-omega", "train+eval over a grid of auxiliary-loss scales");
  std::string sweep_data, sweep_grid = "0,0.01,0.1,1,10";
  sweep_cmd->add_option("--data", sweep_data, "dataset directory");
  sweep_cmd->add_option("--grid", sweep_grid, "comma list of omega values");
  add_train_keys(sweep_cmd, rc, keys);
  add_data_keys(sweep_cmd, rc, keys);
  add_eval_keys(sweep_cmd, rc, keys);
  rc.add_string(sweep_cmd, "out", &keys.out, "output directory");

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) rc.apply_file(config_path);

    if (fit_cmd->parsed()) {
      return run_fit_normalizer(fit_dim, fit_kmin, fit_kmax, fit_points,
                                fit_preset, fit_out, rc.snapshot());
    }
    if (validate_cmd->parsed()) return run_validate();
    if (gen_cmd->parsed()) return run_gen_data(keys, rc);
    if (train_cmd->parsed()) return run_train(train_data, keys, rc);
    if (eval_cmd->parsed()) return run_eval(eval_data, eval_checkpoint, keys, rc);
    if (surf_cmd->parsed()) {
      return run_metric_surface(surf_metric, surf_kappa_p, surf_kz, surf_angle,
                                surf_dim, surf_mc, surf_seed, surf_normalizer,
                                surf_out, rc.snapshot());
    }
    if (sweep_cmd->parsed()) {
      return run_sweep_omega(sweep_data, sweep_grid, keys, rc);
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const pdml::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
