#include "crnreal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

#include "parallel.hpp"

namespace crnreal {

namespace {

using nlohmann::json;

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json Rows(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

json BoolRows(const BoolMatrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c) ? 1 : 0);
    rows.push_back(row);
  }
  return rows;
}

Matrix MatrixFrom(const json& j) {
  if (!j.is_array()) throw ConfigError("expected a matrix (array of rows)");
  if (j.empty()) return Matrix(0, 0);
  Matrix M(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != static_cast<std::size_t>(M.cols())) throw ConfigError("matrix has ragged rows");
    for (std::size_t c = 0; c < j[r].size(); ++c) {
      const json& v = j[r][c];
      M(r, c) = v.is_boolean() ? (v.get<bool>() ? 1.0 : 0.0) : v.get<double>();
    }
  }
  return M;
}

json EdgesJson(const EdgeSet& edges) {
  json out = json::array();
  for (const Edge& e : edges) out.push_back(e.ToString());
  return out;
}

EdgeSet EdgesFrom(const json& j) {
  EdgeSet out;
  if (j.is_string()) {
    out.insert(ParseEdge(j.get<std::string>()));
    return out;
  }
  for (const auto& e : j) out.insert(ParseEdge(e.get<std::string>()));
  return out;
}

json BigJson(const BigInt& v) {
  if (v <= BigInt(9007199254740992LL)) return v.convert_to<long long>();
  return v.str();
}

std::string NoiseName(NoiseModel m) { return m == NoiseModel::kState ? "state" : "derivative"; }

NoiseModel NoiseFrom(const std::string& s) {
  if (s == "state") return NoiseModel::kState;
  if (s == "derivative") return NoiseModel::kDerivative;
  throw ConfigError("noise model must be 'state' or 'derivative', got '" + s + "'");
}

std::string EstimatorName(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kLse: return "lse";
    case EstimatorKind::kSbl: return "sbl";
    case EstimatorKind::kExact: return "exact";
  }
  return "";
}

std::string ExperimentFile(int e) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "experiment_%03d.csv", e + 1);
  return buf;
}

// Seed for the derivative-noise stream, kept apart from the simulation stream.
std::uint64_t DerivativeSeed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

}  // namespace

std::vector<double> SweepSpec::Points() const {
  std::vector<double> out;
  if (count == 1) return {lo};
  for (int k = 0; k < count; ++k) {
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1)));
  }
  out.back() = hi;
  return out;
}

void ExperimentConfig::Validate() const {
  if (!(h > 0.0) || !(T > h)) throw ConfigError("protocol needs T > h > 0");
  if (num_experiments < 1) throw ConfigError("num_experiments must be at least 1");
  if (!(x0_lo >= 0.0) || !(x0_hi >= x0_lo)) throw ConfigError("x0_range must satisfy 0 <= lo <= hi");
  if (!(sigma2 >= 0.0)) throw ConfigError("sigma2 must be nonnegative");
  if (sweep && (sweep->count < 1 || !(sweep->lo > 0.0) || !(sweep->hi >= sweep->lo))) {
    throw ConfigError("sweep needs count >= 1 and 0 < lo <= hi");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (zero_mask && (zero_mask->rows() != model.M.rows() || zero_mask->cols() != model.M.cols())) {
    throw ConfigError("zero_mask must be species x complexes");
  }
  if (sbl_lambda && !(*sbl_lambda > 0.0)) throw ConfigError("SBL lambda must be positive");
  const int m = model.complexes.num_complexes();
  auto check_edges = [&](const EdgeSet& edges) {
    for (const Edge& e : edges) {
      if (e.source < 0 || e.target < 0 || e.source >= m || e.target >= m || e.source == e.target) {
        throw ConfigError("exclusion " + e.ToString() + " is not an edge of this model");
      }
    }
  };
  check_edges(exclusions);
  for (const auto& s : exclusion_sets) check_edges(s);
  try {
    (void)model.System();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

ExperimentConfig ConfigFromJson(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  try {
    if (j.contains("model")) {
      const json& m = j.at("model");
      if (m.is_string()) {
        const std::filesystem::path path = resolve(m.get<std::string>());
        c.model = ReadModel(path);
        c.model_source = path.string();
      } else {
        c.model = ModelFromJson(m);
        c.model_source = "inline";
      }
    }
    if (j.contains("protocol")) {
      const json& p = j.at("protocol");
      c.num_experiments = p.value("num_experiments", c.num_experiments);
      c.T = p.value("T", c.T);
      c.h = p.value("h", c.h);
      if (p.contains("x0_range")) {
        c.x0_lo = p.at("x0_range").at(0).get<double>();
        c.x0_hi = p.at("x0_range").at(1).get<double>();
      }
      if (p.value("sampling", std::string("latin-hypercube")) != "latin-hypercube") {
        throw ConfigError("only latin-hypercube sampling is supported");
      }
      c.seed = p.value("seed", c.seed);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      c.sigma2 = n.value("sigma2", c.sigma2);
      c.noise_model = NoiseFrom(n.value("model", std::string("state")));
      if (n.contains("sweep")) {
        const json& s = n.at("sweep");
        SweepSpec sweep;
        sweep.lo = s.value("lo", sweep.lo);
        sweep.hi = s.value("hi", sweep.hi);
        sweep.count = s.value("count", sweep.count);
        c.sweep = sweep;
      }
    }
    if (j.contains("estimator")) {
      const json& e = j.at("estimator");
      const std::string method = e.value("method", std::string("lse"));
      if (method == "lse") {
        c.estimator = EstimatorKind::kLse;
      } else if (method == "sbl") {
        c.estimator = EstimatorKind::kSbl;
      } else if (method == "exact") {
        c.estimator = EstimatorKind::kExact;
      } else {
        throw ConfigError("estimator method must be lse, sbl or exact");
      }
      if (e.contains("zero_mask")) c.zero_mask = MatrixFrom(e.at("zero_mask")).array() != 0.0;
      if (e.contains("lambda")) c.sbl_lambda = e.at("lambda").get<double>();
      c.allow_negative_states = e.value("allow_negative_states", c.allow_negative_states);
    }
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("exclusions")) c.exclusions = EdgesFrom(j.at("exclusions"));
    if (j.contains("exclusion_sets")) {
      for (const auto& s : j.at("exclusion_sets")) c.exclusion_sets.push_back(EdgesFrom(s));
    }
    if (j.contains("output")) c.output_dir = resolve(j.at("output").get<std::string>());
    if (j.contains("data")) c.data_manifest = resolve(j.at("data").get<std::string>());
    c.threads = j.value("threads", c.threads);
    c.max_realizations = j.value("max_realizations", c.max_realizations);
    c.dot_all = j.value("dot_all", c.dot_all);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.Validate();
  return c;
}

ExperimentConfig ReadConfig(const std::filesystem::path& path) {
  json j;
  try {
    j = ReadJson(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return ConfigFromJson(j, path.parent_path().empty() ? "." : path.parent_path());
}

json ConfigToJson(const ExperimentConfig& c) {
  json j;
  j["model"] = ModelToJson(c.model);
  j["protocol"] = {{"num_experiments", c.num_experiments},
                   {"T", c.T},
                   {"h", c.h},
                   {"x0_range", {c.x0_lo, c.x0_hi}},
                   {"sampling", "latin-hypercube"},
                   {"seed", c.seed}};
  j["noise"] = {{"sigma2", c.sigma2}, {"model", NoiseName(c.noise_model)}};
  if (c.sweep) j["noise"]["sweep"] = {{"lo", c.sweep->lo}, {"hi", c.sweep->hi}, {"count", c.sweep->count}};
  json est = {{"method", EstimatorName(c.estimator)}, {"allow_negative_states", c.allow_negative_states}};
  if (c.zero_mask) est["zero_mask"] = BoolRows(*c.zero_mask);
  if (c.sbl_lambda) est["lambda"] = *c.sbl_lambda;
  j["estimator"] = est;
  j["alpha"] = c.alpha;
  j["exclusions"] = EdgesJson(c.exclusions);
  j["exclusion_sets"] = json::array();
  for (const auto& s : c.exclusion_sets) j["exclusion_sets"].push_back(EdgesJson(s));
  return j;
}

Matrix LatinHypercube(int samples, int dim, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(samples, dim);
  std::vector<int> strata(samples);
  for (int d = 0; d < dim; ++d) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int k = 0; k < samples; ++k) {
      X(k, d) = lo + (hi - lo) * (strata[k] + u(rng)) / samples;
    }
  }
  return X;
}

Dataset SimulateDataset(const ExperimentConfig& config) {
  std::mt19937_64 rng(config.seed);
  const KineticSystem system = config.model.System();
  const Matrix x0 = LatinHypercube(config.num_experiments, system.num_species(), config.x0_lo,
                                   config.x0_hi, rng);
  Dataset data;
  data.sigma2 = config.sigma2;
  data.noise_model = config.noise_model;
  data.seed = config.seed;
  std::normal_distribution<double> noise(0.0, std::sqrt(config.sigma2));
  const bool noisy = config.noise_model == NoiseModel::kState && config.sigma2 > 0.0;
  for (int e = 0; e < config.num_experiments; ++e) {
    Trajectory t;
    try {
      t = Simulate(system, x0.row(e).transpose(), config.T, config.h);
    } catch (const DivergenceError& err) {
      throw DivergenceError(err.step(), "experiment " + std::to_string(e + 1) + ": " + err.what());
    }
    if (noisy) {
      for (Eigen::Index k = 0; k < t.states.rows(); ++k)
        for (Eigen::Index i = 0; i < t.states.cols(); ++i) t.states(k, i) += noise(rng);
    }
    data.trajectories.push_back(std::move(t));
  }
  return data;
}

std::filesystem::path WriteDataset(const Dataset& dataset, const ExperimentConfig& config,
                                   const std::filesystem::path& dir) {
  json files = json::array();
  for (std::size_t e = 0; e < dataset.trajectories.size(); ++e) {
    const std::string name = ExperimentFile(static_cast<int>(e));
    WriteTrajectory(dataset.trajectories[e], dir / name);
    files.push_back(name);
  }
  json manifest;
  manifest["schema"] = 1;
  manifest["rng"] = "mt19937_64";
  manifest["seed"] = dataset.seed;
  manifest["sampling"] = "latin-hypercube";
  manifest["protocol"] = {{"num_experiments", config.num_experiments},
                          {"T", config.T},
                          {"h", config.h},
                          {"x0_range", {config.x0_lo, config.x0_hi}}};
  manifest["noise"] = {{"sigma2", dataset.sigma2}, {"model", NoiseName(dataset.noise_model)}};
  manifest["model"] = ModelToJson(config.model);
  manifest["files"] = files;
  const std::filesystem::path path = dir / "manifest.json";
  WriteJson(manifest, path);
  return path;
}

Dataset ReadDataset(const std::filesystem::path& manifest_path) {
  const json manifest = ReadJson(manifest_path);
  Dataset data;
  try {
    const double h = manifest.at("protocol").at("h").get<double>();
    data.seed = manifest.at("seed").get<std::uint64_t>();
    data.sigma2 = manifest.at("noise").at("sigma2").get<double>();
    data.noise_model = NoiseFrom(manifest.at("noise").at("model").get<std::string>());
    const std::filesystem::path dir = manifest_path.parent_path();
    for (const auto& f : manifest.at("files")) {
      data.trajectories.push_back(ReadTrajectory(dir / f.get<std::string>(), h));
    }
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  return data;
}

RegressionData PrepareRegression(const Dataset& dataset, const ExperimentConfig& config) {
  RegressionOptions options;
  options.allow_negative_states = config.allow_negative_states;
  RegressionData data = BuildRegression(dataset.trajectories, config.model.complexes, options);
  if (dataset.noise_model == NoiseModel::kDerivative && dataset.sigma2 > 0.0) {
    std::mt19937_64 rng(DerivativeSeed(dataset.seed));
    std::normal_distribution<double> noise(0.0, std::sqrt(dataset.sigma2));
    for (Eigen::Index k = 0; k < data.targets.rows(); ++k)
      for (Eigen::Index i = 0; i < data.targets.cols(); ++i) data.targets(k, i) += noise(rng);
  }
  return data;
}

EstimationResult Estimate(const RegressionData& data, const ExperimentConfig& config) {
  if (config.estimator == EstimatorKind::kSbl) {
    SblOptions options;
    options.lambda = config.sbl_lambda;
    options.threads = config.threads;
    return SblFit(data, options);
  }
  if (config.estimator != EstimatorKind::kLse) throw ContractError("exact mode has no estimation stage");
  const BoolMatrix mask = config.zero_mask ? *config.zero_mask : BoolMatrix(config.model.M.array() == 0.0);
  return LseFit(data, mask);
}

json EstimationToJson(const EstimationResult& r) {
  json j;
  j["method"] = r.method == EstimationResult::Method::kLse ? "lse" : "sbl";
  j["M"] = Rows(r.M);
  j["support"] = BoolRows(r.support);
  j["sigma2"] = std::vector<double>(r.sigma2.data(), r.sigma2.data() + r.sigma2.size());
  j["covariance"] = json::array();
  for (const Matrix& c : r.covariance) j["covariance"].push_back(Rows(c));
  if (r.method == EstimationResult::Method::kSbl) {
    j["lambda"] = std::vector<double>(r.lambda.data(), r.lambda.data() + r.lambda.size());
    j["gamma"] = json::array();
    for (const Vector& g : r.gamma) j["gamma"].push_back(std::vector<double>(g.data(), g.data() + g.size()));
    j["iterations"] = json::array();
    for (const SblTrace& t : r.trace) j["iterations"].push_back(t.iterations);
  }
  j["warnings"] = r.warnings;
  return j;
}

EstimationResult EstimationFromJson(const json& j) {
  EstimationResult r;
  try {
    r.method = j.at("method").get<std::string>() == "sbl" ? EstimationResult::Method::kSbl
                                                            : EstimationResult::Method::kLse;
    r.M = MatrixFrom(j.at("M"));
    r.support = MatrixFrom(j.at("support")).array() != 0.0;
    const auto s2 = j.at("sigma2").get<std::vector<double>>();
    r.sigma2 = Eigen::Map<const Vector>(s2.data(), s2.size());
    for (const auto& c : j.at("covariance")) {
      Matrix cov = MatrixFrom(c);
      r.covariance.push_back(cov.size() ? cov : Matrix(0, 0));
    }
    if (j.contains("lambda")) {
      const auto l = j.at("lambda").get<std::vector<double>>();
      r.lambda = Eigen::Map<const Vector>(l.data(), l.size());
    }
    if (j.contains("gamma")) {
      for (const auto& g : j.at("gamma")) {
        const auto v = g.get<std::vector<double>>();
        r.gamma.push_back(Eigen::Map<const Vector>(v.data(), v.size()));
      }
    }
    if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("estimate file: ") + e.what());
  }
  if (r.M.rows() != r.support.rows() || static_cast<Eigen::Index>(r.covariance.size()) != r.M.rows()) {
    throw ConfigError("estimate file: inconsistent dimensions");
  }
  for (int i = 0; i < r.M.rows(); ++i) {
    const Eigen::Index k = r.support.row(i).count();
    if (r.covariance[i].rows() != k || r.covariance[i].cols() != k) {
      throw ConfigError("estimate file: covariance of row " + std::to_string(i + 1) +
                        " does not match its support");
    }
  }
  return r;
}

RealizationProblem ProblemFor(const ExperimentConfig& config, const EstimationResult* estimate,
                              std::vector<std::string>* warnings) {
  RealizationProblem p;
  p.complexes = config.model.complexes;
  p.excluded = config.exclusions;
  if (config.estimator == EstimatorKind::kExact || !estimate) {
    p.region = UncertaintyRegion::Exact(config.model.M);
  } else {
    p.region = ConfidenceRegion(*estimate, config.alpha, warnings);
  }
  return p;
}

RealizationOptions RealizationOptionsFor(const ExperimentConfig& config) {
  RealizationOptions options;
  if (config.dump_program_dir) {
    auto counter = std::make_shared<std::atomic<int>>(0);
    const std::filesystem::path dir = *config.dump_program_dir;
    options.program_hook = [counter, dir](const ConicProgram& program) {
      char name[48];
      std::snprintf(name, sizeof(name), "program_%06d.json", ++*counter);
      WriteJson(program.ToJson(), dir / name);
    };
  }
  return options;
}

PipelineResult RunPipeline(const ExperimentConfig& config, const Dataset* dataset) {
  const auto start = std::chrono::steady_clock::now();
  PipelineResult out;
  std::vector<std::string> warnings;
  json timing;

  if (config.estimator != EstimatorKind::kExact) {
    Dataset owned;
    if (!dataset) {
      try {
        owned = config.data_manifest ? ReadDataset(*config.data_manifest) : SimulateDataset(config);
      } catch (const IoError& e) {
        throw StageError("data", StageError::Kind::kIo, e.what());
      } catch (const DivergenceError& e) {
        throw StageError("data", StageError::Kind::kNumeric, e.what());
      }
      dataset = &owned;
    }
    const auto t_est = std::chrono::steady_clock::now();
    try {
      out.estimate = Estimate(PrepareRegression(*dataset, config), config);
    } catch (const NumericFailure& e) {
      throw StageError("estimate", StageError::Kind::kNumeric, e.what());
    } catch (const RankDeficiencyError& e) {
      throw StageError("estimate", StageError::Kind::kNumeric, e.what());
    } catch (const ContractError& e) {
      throw StageError("estimate", StageError::Kind::kConfig, e.what());
    }
    timing["estimate_seconds"] = Seconds(t_est);
    warnings.insert(warnings.end(), out.estimate->warnings.begin(), out.estimate->warnings.end());
  }

  RealizationProblem problem;
  try {
    problem = ProblemFor(config, out.estimate ? &*out.estimate : nullptr, &warnings);
  } catch (const ContractError& e) {
    throw StageError("region", StageError::Kind::kConfig, e.what());
  }

  EnumerationOptions options;
  options.realization = RealizationOptionsFor(config);
  options.threads = config.threads;
  options.max_realizations = config.max_realizations;
  const auto t_real = std::chrono::steady_clock::now();
  try {
    out.realizations = EnumerateAll(problem, options);
    out.feasible = true;
    if (!config.exclusion_sets.empty()) {
      out.exclusion_counts = ExclusionStudy(problem, config.exclusion_sets, options);
    }
  } catch (const InfeasibleError& e) {
    out.feasible = false;
    out.certificate = e.what();
  } catch (const NumericFailure& e) {
    throw StageError("realization", StageError::Kind::kNumeric, e.what());
  } catch (const ContractError& e) {
    throw StageError("realization", StageError::Kind::kConfig, e.what());
  }
  timing["realization_seconds"] = Seconds(t_real);

  json& r = out.report;
  r["schema"] = 1;
  json cfg = ConfigToJson(config);
  cfg.erase("model");
  r["config"] = cfg;
  r["model"] = ModelToJson(config.model);
  if (out.estimate) {
    const EstimationResult& est = *out.estimate;
    json e = EstimationToJson(est);
    e.erase("covariance");
    Matrix se = Matrix::Zero(est.M.rows(), est.M.cols());
    for (int i = 0; i < est.M.rows(); ++i) {
      const std::vector<int> cols = est.SupportColumns(i);
      for (std::size_t k = 0; k < cols.size(); ++k) se(i, cols[k]) = std::sqrt(std::max(0.0, est.covariance[i](k, k)));
    }
    e["covariance_summary"] = {{"standard_errors", Rows(se)},
                               {"max_standard_error", se.size() ? se.maxCoeff() : 0.0},
                               {"free_parameters", est.FreeParameters()}};
    r["estimate"] = e;
  } else {
    r["estimate"] = nullptr;
  }
  r["region"] = {{"kind", config.estimator == EstimatorKind::kExact ? "exact" : "ellipsoidal"},
                 {"alpha", config.alpha}};
  r["feasible"] = out.feasible;
  if (!out.feasible) {
    r["certificate"] = out.certificate;
  } else {
    const RealizationSet& set = *out.realizations;
    json dense = json::array();
    for (const Edge& e : set.dense.support) {
      dense.push_back({{"edge", e.ToString()}, {"rate", set.dense.kirchhoff.rate(e)}});
    }
    const int d = static_cast<int>(set.dense.support.size());
    r["dense"] = {{"edges", dense}, {"count", d}};
    json supports = json::array();
    for (const SupportEntry& s : set.supports) supports.push_back(EdgesJson(s.support));
    r["realizations"] = {{"count", set.count()},
                         {"partial", set.partial},
                         {"partial_reason", set.partial_reason},
                         {"supports", supports}};
    if (d > 0) {
      r["r_max"] = BigJson(RMax(d));
      r["info_ratio"] = set.count() ? InfoRatio(BigInt(set.count()), d) : 0.0;
    } else {
      r["r_max"] = 0;
      r["info_ratio"] = 0.0;
    }
    if (!out.exclusion_counts.empty()) {
      json ex = json::array();
      for (const ExclusionCount& c : out.exclusion_counts) {
        ex.push_back({{"excluded", EdgesJson(c.excluded)}, {"count", c.count}, {"partial", c.partial}});
      }
      r["exclusion_study"] = ex;
    }
    timing["solves"] = set.solves;
  }
  r["warnings"] = warnings;
  timing["total_seconds"] = Seconds(start);
  r["timing"] = timing;
  return out;
}

void WritePipelineOutputs(const PipelineResult& result, const ExperimentConfig& config,
                          const std::filesystem::path& dir) {
  WriteJson(result.report, dir / "report.json");
  if (!result.feasible || !result.realizations) return;
  const RealizationSet& set = *result.realizations;
  WriteText(ToDot(config.model.complexes, set.dense.kirchhoff, "dense"), dir / "dense.dot");
  if (config.dot_all) {
    for (std::size_t k = 0; k < set.supports.size(); ++k) {
      char name[48];
      std::snprintf(name, sizeof(name), "realization_%04zu", k + 1);
      WriteText(ToDot(config.model.complexes, set.supports[k].representative.kirchhoff, name),
                dir / "realizations" / (std::string(name) + ".dot"));
    }
  }
}

SweepResult RunSweep(const ExperimentConfig& config) {
  if (!config.sweep) throw ConfigError("no sweep configured");
  const std::vector<double> points = config.sweep->Points();
  SweepResult out;
  out.rows.resize(points.size());
  detail::ParallelFor(points.size(), config.threads, [&](std::size_t k) {
    ExperimentConfig point = config;
    point.sweep.reset();
    point.sigma2 = points[k];
    point.threads = 1;
    point.dot_all = false;
    SweepRow& row = out.rows[k];
    row.sigma2 = points[k];
    row.exclusion_counts.assign(config.exclusion_sets.size(), 0);
    try {
      const PipelineResult res = RunPipeline(point);
      if (!res.feasible) {
        row.status = "infeasible";
        return;
      }
      const RealizationSet& set = *res.realizations;
      row.dense_edges = static_cast<int>(set.dense.support.size());
      row.count = set.count();
      row.ratio = row.dense_edges > 0 && row.count > 0 ? InfoRatio(BigInt(row.count), row.dense_edges) : 0.0;
      for (std::size_t e = 0; e < res.exclusion_counts.size(); ++e) {
        row.exclusion_counts[e] = res.exclusion_counts[e].count;
      }
      if (set.partial) row.status = "partial";
    } catch (const std::exception& e) {
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      row.status = "error: " + msg;
    }
  });

  std::size_t ok = 0, infeasible = 0, saturated = 0, within = 0;
  double first_saturated = 0.0;
  for (const SweepRow& row : out.rows) {
    if (row.status == "infeasible") ++infeasible;
    if (row.status != "ok") continue;
    ++ok;
    if (row.dense_edges > 0 && BigInt(row.count) <= RMax(row.dense_edges)) ++within;
    if (row.ratio == 1.0) {
      if (saturated++ == 0) first_saturated = row.sigma2;
    }
  }
  std::ostringstream os;
  os << out.rows.size() << " points: " << ok << " realizable, " << infeasible << " infeasible, "
     << out.rows.size() - ok - infeasible << " failed; " << within << " with count <= r_max(dense edges); "
     << saturated << " saturated";
  if (saturated) os << " (first at sigma2 = " << first_saturated << ")";
  out.summary = os.str();
  return out;
}

std::string SweepToCsv(const SweepResult& sweep, const ExperimentConfig& config) {
  std::string out = "sigma2,dense_edges,count,ratio";
  for (const EdgeSet& s : config.exclusion_sets) {
    std::string name = "count_excl";
    for (const Edge& e : s) name += ":" + e.ToString();
    if (s.empty()) name += ":none";
    out += "," + name;
  }
  out += ",status\n";
  for (const SweepRow& row : sweep.rows) {
    out += FormatDouble(row.sigma2) + "," + std::to_string(row.dense_edges) + "," + std::to_string(row.count) +
           "," + FormatDouble(row.ratio);
    for (std::size_t c : row.exclusion_counts) out += "," + std::to_string(c);
    out += "," + row.status + "\n";
  }
  return out;
}

}  // namespace crnreal
