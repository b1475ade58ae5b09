#pragma once

// End-to-end runs: synthetic data, estimation, uncertainty region, dense
// realization, enumeration, reports and sweeps.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crnreal/enumeration.hpp"
#include "crnreal/estimation.hpp"
#include "crnreal/io.hpp"

namespace crnreal {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Where measurement noise enters. kState perturbs every sampled state before
/// differencing; kDerivative leaves the states clean and perturbs the
/// difference quotients (the regression targets) instead.
enum class NoiseModel { kState, kDerivative };

enum class EstimatorKind { kLse, kSbl, kExact };

struct SweepSpec {
  double lo = 1e-4;
  double hi = 10.0;
  int count = 20;

  std::vector<double> Points() const;  // log-spaced, inclusive
};

struct ExperimentConfig {
  Model model = BenchmarkModel();
  std::string model_source = "builtin:benchmark";

  int num_experiments = 50;
  double T = 10.0;
  double h = 0.01;
  double x0_lo = 0.0;
  double x0_hi = 1.0;
  std::uint64_t seed = 1;

  double sigma2 = 1e-4;
  NoiseModel noise_model = NoiseModel::kState;
  std::optional<SweepSpec> sweep;

  EstimatorKind estimator = EstimatorKind::kLse;
  std::optional<BoolMatrix> zero_mask;  // LSE; default: zeros of the model's M
  std::optional<double> sbl_lambda;
  bool allow_negative_states = true;

  double alpha = 0.05;
  EdgeSet exclusions;
  std::vector<EdgeSet> exclusion_sets;  // extra counts per run / sweep column

  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> data_manifest;  // read data instead of simulating
  int threads = 1;
  std::size_t max_realizations = 0;
  bool dot_all = false;
  std::optional<std::filesystem::path> dump_program_dir;

  void Validate() const;  // throws ConfigError
};

/// Relative paths inside the JSON resolve against `base_dir`.
ExperimentConfig ConfigFromJson(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig ReadConfig(const std::filesystem::path& path);
nlohmann::json ConfigToJson(const ExperimentConfig& config);

/// Plain Latin hypercube on [lo, hi]^dim: one uniform point per stratum and
/// dimension, strata permuted independently per dimension.
Matrix LatinHypercube(int samples, int dim, double lo, double hi, std::mt19937_64& rng);

struct Dataset {
  std::vector<Trajectory> trajectories;
  double sigma2 = 0.0;
  NoiseModel noise_model = NoiseModel::kState;
  std::uint64_t seed = 0;
};

/// Simulates every experiment and applies state noise (kState). Deterministic
/// in the config's seed and sigma2.
Dataset SimulateDataset(const ExperimentConfig& config);

/// Writes one CSV per experiment and manifest.json into `dir`; returns the
/// manifest path.
std::filesystem::path WriteDataset(const Dataset& dataset, const ExperimentConfig& config,
                                   const std::filesystem::path& dir);
Dataset ReadDataset(const std::filesystem::path& manifest);

/// Regression data, including the target perturbation for kDerivative.
RegressionData PrepareRegression(const Dataset& dataset, const ExperimentConfig& config);

EstimationResult Estimate(const RegressionData& data, const ExperimentConfig& config);

nlohmann::json EstimationToJson(const EstimationResult& result);
EstimationResult EstimationFromJson(const nlohmann::json& j);

/// The realization problem of a run: the exact model for kExact, otherwise
/// the (1 - alpha) confidence region of the estimate.
RealizationProblem ProblemFor(const ExperimentConfig& config, const EstimationResult* estimate,
                              std::vector<std::string>* warnings = nullptr);

/// Realization options honouring threads and the program dump directory.
RealizationOptions RealizationOptionsFor(const ExperimentConfig& config);

/// Error carrying the pipeline stage that failed.
class StageError : public std::runtime_error {
 public:
  enum class Kind { kNumeric, kConfig, kIo, kOther };
  StageError(std::string stage, Kind kind, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), kind_(kind) {}
  const std::string& stage() const { return stage_; }
  Kind kind() const { return kind_; }

 private:
  std::string stage_;
  Kind kind_;
};

struct PipelineResult {
  std::optional<EstimationResult> estimate;
  bool feasible = false;
  std::string certificate;
  std::optional<RealizationSet> realizations;
  std::vector<ExclusionCount> exclusion_counts;
  nlohmann::json report;
};

/// Runs data -> estimate -> region -> dense -> enumeration. `dataset`
/// overrides both simulation and the configured manifest.
PipelineResult RunPipeline(const ExperimentConfig& config, const Dataset* dataset = nullptr);

/// Writes report.json and the DOT files of a finished run into `dir`.
void WritePipelineOutputs(const PipelineResult& result, const ExperimentConfig& config,
                          const std::filesystem::path& dir);

struct SweepRow {
  double sigma2 = 0.0;
  int dense_edges = 0;
  std::size_t count = 0;
  double ratio = 0.0;
  std::vector<std::size_t> exclusion_counts;
  std::string status = "ok";
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string summary;
};

/// One full pipeline per sigma2 point (same seed at every point), points in a
/// parallel pool. Failures are recorded per row.
SweepResult RunSweep(const ExperimentConfig& config);
std::string SweepToCsv(const SweepResult& sweep, const ExperimentConfig& config);

}  // namespace crnreal
