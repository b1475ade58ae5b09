#pragma once

// File formats: model JSON, trajectory CSV and Graphviz DOT.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "crnreal/enumeration.hpp"
#include "crnreal/kinetic.hpp"

namespace crnreal {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// { "species": [...], "complexes": [[...], ...] (columns of Y), "M": [[...]],
///   "A_kappa": [[...]] (optional) }. M may be omitted when A_kappa is given.
struct Model {
  ComplexMatrix complexes;
  Matrix M;
  std::optional<KirchhoffMatrix> kirchhoff;

  KineticSystem System() const { return KineticSystem(complexes, M); }
};

Model ModelFromJson(const nlohmann::json& j);
nlohmann::json ModelToJson(const Model& model);
Model ReadModel(const std::filesystem::path& path);
void WriteModel(const Model& model, const std::filesystem::path& path);

/// The benchmark network as a Model.
Model BenchmarkModel();

nlohmann::json ReadJson(const std::filesystem::path& path);
void WriteJson(const nlohmann::json& j, const std::filesystem::path& path);
void WriteText(const std::string& text, const std::filesystem::path& path);

/// Shortest decimal form that round-trips (at most 17 significant digits).
std::string FormatDouble(double v);

/// Header `t,x1,...,xn`, one row per sample.
std::string TrajectoryToCsv(const Trajectory& trajectory);
void WriteTrajectory(const Trajectory& trajectory, const std::filesystem::path& path);

/// `h` is taken from `step` when given, else from the time column.
Trajectory ReadTrajectory(const std::filesystem::path& path, std::optional<double> step = {});

/// Feinberg-Horn-Jackson graph: one node per complex, labelled with its
/// formula, and one edge per reaction with its rate to four decimals.
std::string ToDot(const ComplexMatrix& complexes, const KirchhoffMatrix& kirchhoff,
                  const std::string& name = "realization");

}  // namespace crnreal
