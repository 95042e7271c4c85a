#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdml/evaluation.hpp"
#include "pdml/losses.hpp"
#include "pdml/specfn.hpp"
#include "pdml/synthdata.hpp"
#include "pdml/trainer.hpp"

namespace pdml::io {

using json = nlohmann::json;

// Shortest round-trip decimal form; C locale ('.' decimal point).
std::string format_double(double v);

// Comma-separated, '.' decimal, LF line endings, UTF-8.
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

void write_dataset_csv(const std::filesystem::path& path,
                       const LabeledDataset& dataset);
LabeledDataset read_dataset_csv(const std::filesystem::path& path);

// Sidecar with the generator's per-sample ambiguity flags.
void write_flags_csv(const std::filesystem::path& path,
                     const LabeledDataset& dataset);
std::vector<bool> read_flags_csv(const std::filesystem::path& path);

void write_spec_json(const std::filesystem::path& path,
                     const SyntheticSpec& spec);
SyntheticSpec read_spec_json(const std::filesystem::path& path);

// One row per sample, M columns, header x0..x{M-1}.
void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<UnitVector>& samples);

json params_to_json(const VmfParams& p);
json params_to_json(const NivmfParams& p);
json fit_to_json(const QuadraticNormalizerFit& fit);

// FNV-1a 64-bit over the canonical (sorted) key=value serialization.
std::string config_hash(const std::map<std::string, std::string>& config);

void write_manifest(const std::filesystem::path& path,
                    const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    std::uint64_t seed, const std::string& config_hash,
                    double wall_time_seconds);

struct Checkpoint {
  std::map<std::string, std::string> config;
  std::string config_hash;
  // Materialized proxy views.
  Matrix mu;          // C x M
  Matrix kappa;       // C x M (per-dimension) or C x 1 (scalar)
  bool per_dimension = false;
  Matrix encoder;     // empty when identity
  double log_temperature = 0.0;
  long step = 0;

  ProxyBank to_bank() const;
};

void write_checkpoint(const std::filesystem::path& path,
                      const TrainState& state,
                      const std::map<std::string, std::string>& config,
                      const std::string& config_hash);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void write_epoch_log_csv(const std::filesystem::path& path,
                         const std::vector<EpochLog>& epochs);
void write_step_trace_csv(const std::filesystem::path& path,
                          const std::vector<StepTrace>& steps);
void write_norm_histogram_csv(const std::filesystem::path& path,
                              const NormHistogram& hist);
void write_report_json(const std::filesystem::path& path,
                       const RetrievalReport& report,
                       const DiversityReport& diversity,
                       const std::string& config_hash);

}  // namespace pdml::io
