#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "crnreal/enumeration.hpp"
#include "crnreal/io.hpp"
#include "crnreal/pipeline.hpp"

using namespace crnreal;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kInfeasible = 2, kNumeric = 3, kConfig = 4 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
  std::string dump_program;
};

struct Shared {
  std::string model;
  std::optional<double> sigma2;
  std::string noise_model;
  std::string method;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::vector<std::string> exclude;
  std::optional<std::size_t> max_realizations;
  bool dot_all = false;
  std::string data;
  std::optional<int> experiments;
  std::optional<double> T;
  std::optional<double> h;
};

void AddShared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--model", s.model, "Model JSON (default: built-in benchmark)");
  cmd->add_option("--sigma2", s.sigma2, "Measurement noise variance");
  cmd->add_option("--noise-model", s.noise_model, "state | derivative")
      ->check(CLI::IsMember({"state", "derivative"}));
  cmd->add_option("--method", s.method, "lse | sbl | exact")->check(CLI::IsMember({"lse", "sbl", "exact"}));
  cmd->add_option("--lambda", s.lambda, "SBL noise variance parameter");
  cmd->add_option("--alpha", s.alpha, "Confidence level parameter");
  cmd->add_option("--exclude", s.exclude, "Edge forced absent, e.g. C4->C1 (repeatable)");
  cmd->add_option("--max-realizations", s.max_realizations, "Stop enumeration after this many");
  cmd->add_flag("--dot-all", s.dot_all, "Write a DOT file for every realization");
  cmd->add_option("--data", s.data, "Dataset manifest.json to read instead of simulating");
  cmd->add_option("--experiments", s.experiments, "Number of experiments");
  cmd->add_option("--duration", s.T, "Experiment duration T");
  cmd->add_option("--step", s.h, "Sampling step h");
}

ExperimentConfig BuildConfig(const Globals& g, const Shared& s) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : ReadConfig(g.config);
  if (!s.model.empty()) {
    try {
      c.model = ReadModel(s.model);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    c.model_source = s.model;
  }
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  if (g.threads) c.threads = *g.threads;
  if (!g.dump_program.empty()) c.dump_program_dir = g.dump_program;
  if (s.sigma2) c.sigma2 = *s.sigma2;
  if (!s.noise_model.empty()) c.noise_model = s.noise_model == "state" ? NoiseModel::kState : NoiseModel::kDerivative;
  if (s.method == "lse") c.estimator = EstimatorKind::kLse;
  if (s.method == "sbl") c.estimator = EstimatorKind::kSbl;
  if (s.method == "exact") c.estimator = EstimatorKind::kExact;
  if (s.lambda) c.sbl_lambda = *s.lambda;
  if (s.alpha) c.alpha = *s.alpha;
  try {
    for (const auto& e : s.exclude) c.exclusions.insert(ParseEdge(e));
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (s.max_realizations) c.max_realizations = *s.max_realizations;
  if (s.dot_all) c.dot_all = true;
  if (!s.data.empty()) c.data_manifest = s.data;
  if (s.experiments) c.num_experiments = *s.experiments;
  if (s.T) c.T = *s.T;
  if (s.h) c.h = *s.h;
  c.Validate();
  return c;
}

json RatesJson(const Realization& r) {
  json edges = json::array();
  for (const Edge& e : r.support) edges.push_back({{"edge", e.ToString()}, {"rate", r.kirchhoff.rate(e)}});
  return edges;
}

Realization RealizationFromJson(const json& j, int m) {
  std::vector<std::pair<Edge, double>> rates;
  for (const auto& e : j) rates.emplace_back(ParseEdge(e.at("edge").get<std::string>()), e.at("rate").get<double>());
  Realization r;
  r.kirchhoff = KirchhoffMatrix::FromRates(m, rates);
  r.support = r.kirchhoff.Support();
  return r;
}

// Problem for dense/enumerate: an estimate file, a spherical ball, or the
// exact model.
RealizationProblem ProblemFromInputs(const ExperimentConfig& c, const std::string& estimate_path,
                                     std::optional<double> rho, std::vector<std::string>& warnings) {
  RealizationProblem p;
  p.complexes = c.model.complexes;
  p.excluded = c.exclusions;
  if (!estimate_path.empty()) {
    const EstimationResult est = EstimationFromJson(ReadJson(estimate_path));
    if (est.M.rows() != c.model.M.rows() || est.M.cols() != c.model.M.cols()) {
      throw ConfigError("estimate does not match the model dimensions");
    }
    p.region = ConfidenceRegion(est, c.alpha, &warnings);
  } else if (rho) {
    p.region = UncertaintyRegion::Spherical(c.model.M, *rho);
  } else {
    p.region = UncertaintyRegion::Exact(c.model.M);
  }
  return p;
}

int Run(int argc, char** argv) {
  CLI::App app{"Reaction network realizations from kinetic models and time-series data"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads");
  app.add_option("--dump-program", g.dump_program, "Directory receiving every solved program as JSON");

  Shared s;
  std::string estimate_path, realizations_path, output_path;
  std::optional<double> rho;
  std::vector<double> x0;
  bool brute = false;
  std::optional<double> lo, hi;
  std::optional<int> count;
  std::vector<std::string> exclusion_sets;

  auto* simulate = app.add_subcommand("simulate", "Generate a dataset (CSV per experiment + manifest)");
  AddShared(simulate, s);
  simulate->add_option("--x0", x0, "Single initial state; writes one trajectory to --output")->delimiter(',');
  simulate->add_option("--output", output_path, "CSV path for --x0 (default: stdout)");

  auto* estimate = app.add_subcommand("estimate", "Estimate M from a dataset");
  AddShared(estimate, s);

  auto* dense = app.add_subcommand("dense", "Dense realization of a model or an estimate");
  AddShared(dense, s);
  dense->add_option("--estimate", estimate_path, "estimate.json from the estimate command");
  dense->add_option("--rho", rho, "Frobenius ball radius around the model's M");

  auto* enumerate = app.add_subcommand("enumerate", "All structurally different realizations");
  AddShared(enumerate, s);
  enumerate->add_option("--estimate", estimate_path, "estimate.json from the estimate command");
  enumerate->add_option("--rho", rho, "Frobenius ball radius around the model's M");
  enumerate->add_flag("--check-brute-force", brute, "Compare with exhaustive subset enumeration");

  auto* pipeline = app.add_subcommand("pipeline", "Data, estimation, region, dense and enumeration");
  AddShared(pipeline, s);

  auto* sweep = app.add_subcommand("sweep", "Pipeline over log-spaced noise levels");
  AddShared(sweep, s);
  sweep->add_option("--lo", lo, "Smallest sigma2");
  sweep->add_option("--hi", hi, "Largest sigma2");
  sweep->add_option("--count", count, "Number of points");
  sweep->add_option("--exclusion-set", exclusion_sets,
                    "Extra count column; edges separated by ';', empty string for none (repeatable)");

  auto* export_dot = app.add_subcommand("export-dot", "DOT files for a model or a realizations file");
  AddShared(export_dot, s);
  export_dot->add_option("--realizations", realizations_path, "realizations.json from enumerate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  ExperimentConfig c = BuildConfig(g, s);
  const std::filesystem::path out = c.output_dir;
  std::vector<std::string> warnings;
  auto print_warnings = [&] {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  };

  if (*simulate) {
    if (!x0.empty()) {
      if (static_cast<int>(x0.size()) != c.model.complexes.num_species()) {
        throw ConfigError("--x0 needs one value per species");
      }
      const Trajectory t = Simulate(c.model.System(), Eigen::Map<const Vector>(x0.data(), x0.size()), c.T, c.h);
      if (output_path.empty()) {
        std::cout << TrajectoryToCsv(t);
      } else {
        WriteTrajectory(t, output_path);
      }
      return kOk;
    }
    const Dataset d = SimulateDataset(c);
    std::cout << WriteDataset(d, c, out / "data").string() << "\n";
    return kOk;
  }

  if (*estimate) {
    if (c.estimator == EstimatorKind::kExact) throw ConfigError("estimate needs method lse or sbl");
    const Dataset d = c.data_manifest ? ReadDataset(*c.data_manifest) : SimulateDataset(c);
    const EstimationResult r = Estimate(PrepareRegression(d, c), c);
    WriteJson(EstimationToJson(r), out / "estimate.json");
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "estimated " << r.FreeParameters() << " coefficients; wrote " << (out / "estimate.json").string()
              << "\n";
    return kOk;
  }

  if (*dense || *enumerate) {
    const RealizationProblem p = ProblemFromInputs(c, estimate_path, rho, warnings);
    print_warnings();
    RealizationOptions ropts = RealizationOptionsFor(c);
    if (*dense) {
      const DenseOutcome d = DenseRealization(p, ropts);
      if (!d.feasible()) {
        std::cerr << "infeasible: " << d.certificate << "\n";
        return kInfeasible;
      }
      WriteJson({{"schema", 1}, {"edges", RatesJson(*d.realization)}, {"solves", d.solves}}, out / "dense.json");
      WriteText(ToDot(c.model.complexes, d.realization->kirchhoff, "dense"), out / "dense.dot");
      std::cout << "dense realization: " << d.realization->support.size() << " edges "
                << EdgeSetToString(d.realization->support) << "\n";
      return kOk;
    }
    EnumerationOptions eopts;
    eopts.realization = ropts;
    eopts.threads = c.threads;
    eopts.max_realizations = c.max_realizations;
    RealizationSet set;
    try {
      set = EnumerateAll(p, eopts);
    } catch (const InfeasibleError& e) {
      std::cerr << "infeasible: " << e.what() << "\n";
      return kInfeasible;
    }
    json supports = json::array();
    for (const SupportEntry& e : set.supports) supports.push_back(RatesJson(e.representative));
    const int d = static_cast<int>(set.dense.support.size());
    json doc = {{"schema", 1},
                {"dense", RatesJson(set.dense)},
                {"count", set.count()},
                {"partial", set.partial},
                {"partial_reason", set.partial_reason},
                {"r_max", d > 0 ? RMax(d).str() : "0"},
                {"realizations", supports}};
    if (brute) {
      const RealizationSet ref = BruteForceEnumerate(p, eopts);
      bool same = ref.count() == set.count();
      for (const SupportEntry& e : ref.supports) same = same && set.Contains(e.support);
      doc["brute_force_count"] = ref.count();
      doc["brute_force_match"] = same;
      std::cout << "brute force: " << ref.count() << " (" << (same ? "match" : "MISMATCH") << ")\n";
    }
    WriteJson(doc, out / "realizations.json");
    WriteText(ToDot(c.model.complexes, set.dense.kirchhoff, "dense"), out / "dense.dot");
    if (c.dot_all) {
      for (std::size_t k = 0; k < set.supports.size(); ++k) {
        const std::string name = "realization_" + std::to_string(k + 1);
        WriteText(ToDot(c.model.complexes, set.supports[k].representative.kirchhoff, name),
                  out / "realizations" / (name + ".dot"));
      }
    }
    std::cout << "dense edges: " << d << "; realizations: " << set.count();
    if (d > 0) std::cout << " of r_max " << RMax(d).str();
    if (set.partial) std::cout << " (partial: " << set.partial_reason << ")";
    std::cout << "\n";
    return kOk;
  }

  if (*pipeline) {
    const PipelineResult r = RunPipeline(c);
    WritePipelineOutputs(r, c, out);
    for (const auto& w : r.report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    if (!r.feasible) {
      std::cerr << "infeasible: " << r.certificate << "\n";
      return kInfeasible;
    }
    std::cout << "dense edges: " << r.report["dense"]["count"] << "; realizations: "
              << r.report["realizations"]["count"] << "; r_max: " << r.report["r_max"]
              << "; info ratio: " << r.report["info_ratio"] << "\n";
    return kOk;
  }

  if (*sweep) {
    if (!c.sweep) c.sweep = SweepSpec{};
    if (lo) c.sweep->lo = *lo;
    if (hi) c.sweep->hi = *hi;
    if (count) c.sweep->count = *count;
    for (const std::string& spec : exclusion_sets) {
      EdgeSet set;
      std::stringstream ss(spec);
      std::string item;
      while (std::getline(ss, item, ';')) {
        if (!item.empty()) set.insert(ParseEdge(item));
      }
      c.exclusion_sets.push_back(set);
    }
    c.Validate();
    const SweepResult r = RunSweep(c);
    WriteText(SweepToCsv(r, c), out / "sweep.csv");
    std::cout << r.summary << "\n";
    return kOk;
  }

  if (*export_dot) {
    if (!realizations_path.empty()) {
      const json doc = ReadJson(realizations_path);
      const int m = c.model.complexes.num_complexes();
      WriteText(ToDot(c.model.complexes, RealizationFromJson(doc.at("dense"), m).kirchhoff, "dense"),
                out / "dense.dot");
      int k = 0;
      for (const auto& r : doc.at("realizations")) {
        const std::string name = "realization_" + std::to_string(++k);
        WriteText(ToDot(c.model.complexes, RealizationFromJson(r, m).kirchhoff, name),
                  out / "realizations" / (name + ".dot"));
      }
      std::cout << "wrote " << k + 1 << " DOT files under " << out.string() << "\n";
      return kOk;
    }
    if (!c.model.kirchhoff) throw ConfigError("model has no A_kappa to export");
    WriteText(ToDot(c.model.complexes, *c.model.kirchhoff, "model"), out / "model.dot");
    std::cout << "wrote " << (out / "model.dot").string() << "\n";
    return kOk;
  }
  return kOther;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: malformed input file: " << e.what() << "\n";
    return kConfig;
  } catch (const StageError& e) {
    std::cerr << "error in " << e.what() << "\n";
    return e.kind() == StageError::Kind::kNumeric ? kNumeric : kConfig;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const RankDeficiencyError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DivergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
