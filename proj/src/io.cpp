#include "crnreal/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crnreal/benchmark.hpp"

namespace crnreal {

namespace {

Matrix MatrixFromRows(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw IoError(what + " must be a nonempty array of rows");
  const std::size_t cols = j[0].size();
  Matrix out(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw IoError(what + " has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw IoError(what + " must contain numbers");
      out(r, c) = j[r][c].get<double>();
    }
  }
  return out;
}

nlohmann::json RowsFromMatrix(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double ParseDouble(const std::string& text, const std::string& where) {
  std::size_t begin = text.find_first_not_of(" \t\r");
  std::size_t end = text.find_last_not_of(" \t\r");
  if (begin == std::string::npos) throw IoError(where + ": empty field");
  double v = 0.0;
  const auto res = std::from_chars(text.data() + begin, text.data() + end + 1, v);
  if (res.ec != std::errc() || res.ptr != text.data() + end + 1) {
    throw IoError(where + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

}  // namespace

Model ModelFromJson(const nlohmann::json& j) {
  try {
    std::vector<std::string> species;
    if (j.contains("species")) species = j.at("species").get<std::vector<std::string>>();
    const nlohmann::json& cx = j.at("complexes");
    if (!cx.is_array() || cx.empty()) throw IoError("complexes must be a nonempty array");
    const std::size_t n = cx[0].size();
    IntMatrix Y(n, cx.size());
    for (std::size_t c = 0; c < cx.size(); ++c) {
      if (cx[c].size() != n) throw IoError("complexes have different lengths");
      for (std::size_t i = 0; i < n; ++i) Y(i, c) = cx[c][i].get<int>();
    }
    Model model;
    model.complexes = ComplexMatrix(Y, species);
    if (j.contains("A_kappa")) {
      model.kirchhoff = KirchhoffMatrix::FromMatrix(MatrixFromRows(j.at("A_kappa"), "A_kappa"));
    }
    if (j.contains("M")) {
      model.M = MatrixFromRows(j.at("M"), "M");
    } else if (model.kirchhoff) {
      model.M = AssembleCoefficients(model.complexes, *model.kirchhoff);
    } else {
      throw IoError("model needs M or A_kappa");
    }
    if (model.M.rows() != Y.rows() || model.M.cols() != Y.cols()) {
      throw IoError("M must be species x complexes");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model: ") + e.what());
  } catch (const ContractError& e) {
    throw IoError(std::string("invalid model: ") + e.what());
  }
}

nlohmann::json ModelToJson(const Model& model) {
  nlohmann::json j;
  j["species"] = model.complexes.species_names();
  nlohmann::json cx = nlohmann::json::array();
  for (int c = 0; c < model.complexes.num_complexes(); ++c) {
    nlohmann::json col = nlohmann::json::array();
    for (int i = 0; i < model.complexes.num_species(); ++i) col.push_back(model.complexes.Y()(i, c));
    cx.push_back(col);
  }
  j["complexes"] = cx;
  j["M"] = RowsFromMatrix(model.M);
  if (model.kirchhoff) j["A_kappa"] = RowsFromMatrix(model.kirchhoff->A());
  return j;
}

Model ReadModel(const std::filesystem::path& path) { return ModelFromJson(ReadJson(path)); }

void WriteModel(const Model& model, const std::filesystem::path& path) {
  WriteJson(ModelToJson(model), path);
}

Model BenchmarkModel() {
  Model model;
  model.complexes = benchmark::Complexes();
  model.kirchhoff = benchmark::Kirchhoff();
  model.M = benchmark::Coefficients();
  return model;
}

nlohmann::json ReadJson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void WriteText(const std::string& text, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void WriteJson(const nlohmann::json& j, const std::filesystem::path& path) {
  WriteText(j.dump(2) + "\n", path);
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string TrajectoryToCsv(const Trajectory& trajectory) {
  std::string out = "t";
  for (Eigen::Index i = 0; i < trajectory.states.cols(); ++i) out += ",x" + std::to_string(i + 1);
  out += "\n";
  for (int k = 0; k < trajectory.num_samples(); ++k) {
    out += FormatDouble(trajectory.times(k));
    for (Eigen::Index i = 0; i < trajectory.states.cols(); ++i) {
      out += ",";
      out += FormatDouble(trajectory.states(k, i));
    }
    out += "\n";
  }
  return out;
}

void WriteTrajectory(const Trajectory& trajectory, const std::filesystem::path& path) {
  WriteText(TrajectoryToCsv(trajectory), path);
}

Trajectory ReadTrajectory(const std::filesystem::path& path, std::optional<double> step) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  const std::vector<std::string> header = SplitCsv(line);
  if (header.size() < 2 || header[0] != "t") throw IoError(path.string() + ": header must be t,x1,...,xn");
  const std::size_t n = header.size() - 1;

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = SplitCsv(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != n + 1) throw IoError(where + ": expected " + std::to_string(n + 1) + " fields");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(ParseDouble(c, where));
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw IoError(path.string() + ": need at least two samples");

  Trajectory t;
  t.times.resize(rows.size());
  t.states.resize(rows.size(), n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    t.times(k) = rows[k][0];
    for (std::size_t i = 0; i < n; ++i) t.states(k, i) = rows[k][i + 1];
  }
  const double span = t.times(t.times.size() - 1) - t.times(0);
  t.h = step ? *step : span / static_cast<double>(rows.size() - 1);
  if (!(t.h > 0.0)) throw IoError(path.string() + ": time column must increase");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (std::abs(t.times(k) - t.times(k - 1) - t.h) > 1e-6 * t.h) {
      throw IoError(path.string() + ": samples are not uniformly spaced at h = " + FormatDouble(t.h));
    }
  }
  return t;
}

std::string ToDot(const ComplexMatrix& complexes, const KirchhoffMatrix& kirchhoff, const std::string& name) {
  std::ostringstream os;
  os << "digraph " << name << " {\n";
  os << "  rankdir=LR;\n";
  for (int j = 0; j < complexes.num_complexes(); ++j) {
    os << "  " << complexes.label(j) << " [label=\"" << complexes.Formula(j) << "\"];\n";
  }
  for (const Edge& e : kirchhoff.Support()) {
    char rate[32];
    std::snprintf(rate, sizeof(rate), "%.4f", kirchhoff.rate(e));
    os << "  " << complexes.label(e.source) << " -> " << complexes.label(e.target) << " [label=\"" << rate
       << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace crnreal
