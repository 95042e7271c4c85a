#include "pdml/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pdml::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);  // binary: keep LF endings
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) {
    throw std::runtime_error("bad number in CSV: '" + s + "'");
  }
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix();
  const Index cols = static_cast<Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    out << header[i] << (i + 1 < header.size() ? "," : "");
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << format_double(row[i]) << (i + 1 < row.size() ? "," : "");
    }
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path,
                       const LabeledDataset& dataset) {
  auto out = open_out(path);
  out << "label";
  for (Index j = 0; j < dataset.features.cols(); ++j) out << ",f" << j;
  out << '\n';
  for (Index i = 0; i < dataset.features.rows(); ++i) {
    out << dataset.labels[i];
    for (Index j = 0; j < dataset.features.cols(); ++j) {
      out << ',' << format_double(dataset.features(i, j));
    }
    out << '\n';
  }
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset CSV");
  const auto header = split_line(line);
  if (header.empty() || header[0] != "label") {
    throw std::runtime_error("dataset CSV must start with a 'label' column");
  }
  const Index f_dim = static_cast<Index>(header.size()) - 1;
  std::vector<int> labels;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split_line(line);
    if (static_cast<Index>(parts.size()) != f_dim + 1) {
      throw std::runtime_error("dataset CSV: ragged row");
    }
    labels.push_back(static_cast<int>(parse_double(parts[0])));
    for (Index j = 0; j < f_dim; ++j) values.push_back(parse_double(parts[j + 1]));
  }
  LabeledDataset d;
  d.features = Matrix(static_cast<Index>(labels.size()), f_dim);
  for (Index i = 0; i < d.features.rows(); ++i) {
    for (Index j = 0; j < f_dim; ++j) d.features(i, j) = values[i * f_dim + j];
  }
  d.labels = std::move(labels);
  d.validate();
  return d;
}

void write_flags_csv(const std::filesystem::path& path,
                     const LabeledDataset& dataset) {
  auto out = open_out(path);
  out << "index,ambiguous\n";
  for (std::size_t i = 0; i < dataset.ambiguous.size(); ++i) {
    out << i << ',' << (dataset.ambiguous[i] ? 1 : 0) << '\n';
  }
}

std::vector<bool> read_flags_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  std::vector<bool> flags;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split_line(line);
    flags.push_back(parts.at(1) == "1");
  }
  return flags;
}

void write_spec_json(const std::filesystem::path& path,
                     const SyntheticSpec& spec) {
  json j;
  j["dims"] = spec.config.dims;
  j["classes"] = spec.config.classes;
  j["samples_per_class"] = spec.config.samples_per_class;
  j["feature_dim"] = spec.config.feature_dim;
  j["kappa_min"] = spec.config.kappa_min;
  j["kappa_max"] = spec.config.kappa_max;
  j["ambiguity_fraction"] = spec.config.ambiguity_fraction;
  j["ambiguity_multiplier"] = spec.config.ambiguity_multiplier;
  j["seed"] = spec.config.seed;
  j["mu"] = matrix_to_json(spec.mu);
  j["kappa"] = matrix_to_json(spec.kappa);
  j["lift"] = matrix_to_json(spec.lift);
  open_out(path) << j.dump(2) << '\n';
}

SyntheticSpec read_spec_json(const std::filesystem::path& path) {
  json j = json::parse(open_in(path));
  SyntheticSpec spec;
  spec.config.dims = j.at("dims").get<int>();
  spec.config.classes = j.at("classes").get<int>();
  spec.config.samples_per_class = j.at("samples_per_class").get<int>();
  spec.config.feature_dim = j.at("feature_dim").get<int>();
  spec.config.kappa_min = j.at("kappa_min").get<double>();
  spec.config.kappa_max = j.at("kappa_max").get<double>();
  spec.config.ambiguity_fraction = j.at("ambiguity_fraction").get<double>();
  spec.config.ambiguity_multiplier = j.at("ambiguity_multiplier").get<double>();
  spec.config.seed = j.at("seed").get<std::uint64_t>();
  spec.mu = matrix_from_json(j.at("mu"));
  spec.kappa = matrix_from_json(j.at("kappa"));
  spec.lift = matrix_from_json(j.at("lift"));
  return spec;
}

void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<UnitVector>& samples) {
  if (samples.empty()) throw DomainError("write_samples_csv: empty sample set");
  auto out = open_out(path);
  const Index m = samples.front().dim();
  for (Index j = 0; j < m; ++j) out << (j ? "," : "") << 'x' << j;
  out << '\n';
  for (const auto& s : samples) {
    for (Index j = 0; j < m; ++j) {
      out << (j ? "," : "") << format_double(s.coords()(j));
    }
    out << '\n';
  }
}

json params_to_json(const VmfParams& p) {
  json j;
  j["mu"] = std::vector<double>(p.mu.coords().data(),
                                p.mu.coords().data() + p.mu.dim());
  j["kappa"] = p.kappa;
  return j;
}

json params_to_json(const NivmfParams& p) {
  json j;
  j["mu"] = std::vector<double>(p.mu.coords().data(),
                                p.mu.coords().data() + p.mu.dim());
  j["kappa_diag"] = std::vector<double>(p.kappa_diag.data(),
                                        p.kappa_diag.data() + p.kappa_diag.size());
  return j;
}

json fit_to_json(const QuadraticNormalizerFit& fit) {
  json j;
  j["dim"] = fit.dim;
  j["a"] = fit.a;
  j["b"] = fit.b;
  j["c"] = fit.c;
  j["kmin"] = fit.kappa_min;
  j["kmax"] = fit.kappa_max;
  j["mse_rel"] = fit.rel_mse;
  return j;
}

std::string config_hash(const std::map<std::string, std::string>& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : config) {
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const std::filesystem::path& path,
                    const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    std::uint64_t seed, const std::string& config_hash,
                    double wall_time_seconds) {
  json j;
  j["command"] = command;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["wall_time_seconds"] = wall_time_seconds;
  open_out(path) << j.dump(2) << '\n';
}

void write_checkpoint(const std::filesystem::path& path,
                      const TrainState& state,
                      const std::map<std::string, std::string>& config,
                      const std::string& config_hash) {
  json j;
  j["config"] = config;
  j["config_hash"] = config_hash;
  json proxies = json::array();
  const bool per_dim =
      state.bank.concentration_kind() == ConcentrationKind::kPerDimension;
  for (int c = 0; c < state.bank.count(); ++c) {
    json p;
    const Vector mu = state.bank.direction(c).coords();
    p["mu"] = std::vector<double>(mu.data(), mu.data() + mu.size());
    if (per_dim) {
      const Vector kd = state.bank.kappa_diag(c);
      p["kappa_diag"] = std::vector<double>(kd.data(), kd.data() + kd.size());
    } else {
      p["kappa"] = state.bank.kappa_scalar(c);
    }
    proxies.push_back(std::move(p));
  }
  j["proxies"] = std::move(proxies);
  if (state.encoder.size() > 0) {
    json enc;
    enc["rows"] = state.encoder.rows();
    enc["cols"] = state.encoder.cols();
    std::vector<double> data;
    data.reserve(state.encoder.size());
    for (Index i = 0; i < state.encoder.rows(); ++i) {
      for (Index jj = 0; jj < state.encoder.cols(); ++jj) {
        data.push_back(state.encoder(i, jj));
      }
    }
    enc["data"] = std::move(data);
    j["encoder"] = std::move(enc);
  }
  j["log_temperature"] = state.log_temperature;
  j["step"] = state.step;
  open_out(path) << j.dump(2) << '\n';
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  json j = json::parse(open_in(path));
  Checkpoint ck;
  for (const auto& [k, v] : j.at("config").items()) {
    ck.config[k] = v.get<std::string>();
  }
  ck.config_hash = j.value("config_hash", "");
  const auto& proxies = j.at("proxies");
  const int c_count = static_cast<int>(proxies.size());
  if (c_count == 0) throw std::runtime_error("checkpoint: no proxies");
  const auto& first = proxies.at(0);
  const int dim = static_cast<int>(first.at("mu").size());
  ck.per_dimension = first.contains("kappa_diag");
  ck.mu = Matrix(c_count, dim);
  ck.kappa = Matrix(c_count, ck.per_dimension ? dim : 1);
  for (int c = 0; c < c_count; ++c) {
    const auto& p = proxies.at(c);
    for (int m = 0; m < dim; ++m) ck.mu(c, m) = p.at("mu").at(m).get<double>();
    if (ck.per_dimension) {
      for (int m = 0; m < dim; ++m) {
        ck.kappa(c, m) = p.at("kappa_diag").at(m).get<double>();
      }
    } else {
      ck.kappa(c, 0) = p.at("kappa").get<double>();
    }
  }
  if (j.contains("encoder")) {
    const auto& enc = j.at("encoder");
    const Index rows = enc.at("rows").get<Index>();
    const Index cols = enc.at("cols").get<Index>();
    ck.encoder = Matrix(rows, cols);
    const auto& data = enc.at("data");
    for (Index i = 0; i < rows; ++i) {
      for (Index c = 0; c < cols; ++c) {
        ck.encoder(i, c) = data.at(i * cols + c).get<double>();
      }
    }
  }
  ck.log_temperature = j.value("log_temperature", 0.0);
  ck.step = j.value("step", 0L);
  return ck;
}

ProxyBank Checkpoint::to_bank() const {
  const int c_count = static_cast<int>(mu.rows());
  const int dim = static_cast<int>(mu.cols());
  ProxyBank bank(c_count, dim,
                 per_dimension ? ConcentrationKind::kPerDimension
                               : ConcentrationKind::kScalar);
  bank.direction_storage() = mu;
  bank.concentration_storage() = kappa.array().log().matrix();
  return bank;
}

void write_epoch_log_csv(const std::filesystem::path& path,
                         const std::vector<EpochLog>& epochs) {
  std::vector<std::vector<double>> rows;
  rows.reserve(epochs.size());
  for (const auto& e : epochs) {
    rows.push_back({static_cast<double>(e.epoch), e.loss, e.recall1, e.map,
                    e.mean_kappa});
  }
  write_csv(path, {"epoch", "loss", "recall1", "map", "mean_kappa"}, rows);
}

void write_step_trace_csv(const std::filesystem::path& path,
                          const std::vector<StepTrace>& steps) {
  std::vector<std::vector<double>> rows;
  rows.reserve(steps.size());
  for (const auto& s : steps) {
    rows.push_back({static_cast<double>(s.step), s.loss, s.aux_loss,
                    s.grad_mu_norm, s.grad_kappa_norm});
  }
  write_csv(path, {"step", "loss", "aux_loss", "grad_mu_norm", "grad_kappa_norm"},
            rows);
}

void write_norm_histogram_csv(const std::filesystem::path& path,
                              const NormHistogram& hist) {
  auto out = open_out(path);
  out << "group,bin_lo,bin_hi,count\n";
  for (const auto& [g, counts] : hist.group_counts) {
    for (Index b = 0; b < counts.size(); ++b) {
      out << g << ',' << format_double(hist.bin_edges(b)) << ','
          << format_double(hist.bin_edges(b + 1)) << ',' << counts(b) << '\n';
    }
  }
}

void write_report_json(const std::filesystem::path& path,
                       const RetrievalReport& report,
                       const DiversityReport& diversity,
                       const std::string& config_hash) {
  json j;
  j["config_hash"] = config_hash;
  j["retrieval"] = to_string(report.metric);
  json recall;
  for (const auto& [k, v] : report.recall_at) {
    recall[std::to_string(k)] = v;
  }
  j["recall_at"] = std::move(recall);
  j["map_at_r"] = report.map_at_r;
  j["r"] = report.r;
  j["feature_diversity"] = diversity.feature_diversity;
  j["cluster_diversity"] = diversity.cluster_diversity;
  j["skipped_classes"] = diversity.skipped_classes;
  open_out(path) << j.dump(2) << '\n';
}

}  // namespace pdml::io
