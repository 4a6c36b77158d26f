#ifndef HOMOSCALE_SNAPSHOT_HPP
#define HOMOSCALE_SNAPSHOT_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "homoscale/coefficient.hpp"
#include "homoscale/field.hpp"

namespace homoscale {

/// TNSR/1 field snapshots: one JSON header line, a newline, then the raw
/// little-endian f64 payload (component-major, each component row-major over
/// the grid axes).
namespace snapshot {

inline std::string shape_name(int order) {
  switch (order) {
    case 0: return "scalar";
    case 1: return "vector";
    case 2: return "matrix";
    default: return "tensor" + std::to_string(order);
  }
}

inline int shape_order(const std::string& name, int d) {
  (void)d;
  if (name == "scalar") return 0;
  if (name == "vector") return 1;
  if (name == "matrix") return 2;
  if (name.rfind("tensor", 0) == 0) return std::stoi(name.substr(6));
  throw ValidationError("TNSR/1: unknown shape " + name);
}

inline void write(const TorusField& f, const std::string& path) {
  nlohmann::json header;
  header["dims"] = f.grid().dims();
  header["shape"] = shape_name(f.order());
  header["dtype"] = "f64";
  header["order"] = "row-major";
  header["d"] = f.grid().d;
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "TNSR/1: cannot open " + path + " for writing");
  out << header.dump() << "\n";
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(f.samples().data()),
            static_cast<std::streamsize>(f.samples().size() * sizeof(double)));
  require(out.good(), "TNSR/1: short write to " + path);
}

inline TorusField read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "TNSR/1: cannot open " + path);
  std::string line;
  std::getline(in, line);
  auto header = nlohmann::json::parse(line);
  require(header.at("dtype") == "f64", "TNSR/1: unsupported dtype");
  require(header.at("order") == "row-major", "TNSR/1: unsupported layout");
  std::vector<int> dims = header.at("dims").get<std::vector<int>>();
  int d = header.value("d", 1);
  require(dims.size() % d == 0, "TNSR/1: dims not divisible by d");
  int n = static_cast<int>(dims.size()) / d;
  std::vector<int> res(n);
  for (int b = 0; b < n; ++b) {
    res[b] = dims[b * d];
    for (int c = 1; c < d; ++c)
      require(dims[b * d + c] == res[b], "TNSR/1: non-uniform block resolution");
  }
  GridSpec grid(d, n, res);
  int order = shape_order(header.at("shape").get<std::string>(), d);
  TorusField f(grid, order);
  in.read(reinterpret_cast<char*>(f.samples().data()),
          static_cast<std::streamsize>(f.samples().size() * sizeof(double)));
  require(in.gcount() == static_cast<std::streamsize>(f.samples().size() * sizeof(double)),
          "TNSR/1: truncated payload in " + path);
  return f;
}

}  // namespace snapshot

/// Coefficient documents: {"d":..,"n":..,"lambda":..,"C0":..,"Lambda0":..,
/// "modes":[{"freq":[[k11,..],[k21,..]],"matrix":[[..]],"matrix_sin":[[..]]}]}
/// where `matrix` is the cosine amplitude and `matrix_sin` the optional sine
/// amplitude of that frequency.
namespace coefficient_io {

inline Mat parse_mat(const nlohmann::json& j, int d) {
  Mat m(d);
  require(static_cast<int>(j.size()) == d, "coefficient: matrix row count != d");
  for (int i = 0; i < d; ++i) {
    require(static_cast<int>(j[i].size()) == d, "coefficient: matrix column count != d");
    for (int c = 0; c < d; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

inline nlohmann::json dump_mat(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.d; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.d; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline AnalyticCoefficient from_json(const nlohmann::json& j) {
  int d = j.at("d").get<int>();
  int n = j.at("n").get<int>();
  AnalyticCoefficient coef(d, n, j.at("lambda").get<double>(), j.value("C0", 1.0),
                           j.value("Lambda0", 1.0));
  for (const auto& mode : j.at("modes")) {
    std::vector<std::vector<int>> freq = mode.at("freq").get<std::vector<std::vector<int>>>();
    Mat cos_amp = parse_mat(mode.at("matrix"), d);
    Mat sin_amp(d);
    if (mode.contains("matrix_sin")) sin_amp = parse_mat(mode.at("matrix_sin"), d);
    coef.add_mode(std::move(freq), cos_amp, sin_amp);
  }
  return coef;
}

inline AnalyticCoefficient load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "coefficient: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

inline nlohmann::json to_json(const AnalyticCoefficient& c) {
  nlohmann::json j;
  j["d"] = c.d();
  j["n"] = c.n();
  j["lambda"] = c.lambda();
  j["C0"] = c.C0();
  j["Lambda0"] = c.Lambda0();
  j["modes"] = nlohmann::json::array();
  for (const auto& m : c.modes()) {
    nlohmann::json mode;
    mode["freq"] = m.freq;
    mode["matrix"] = dump_mat(m.cos_amp);
    if (m.sin_amp.max_abs() != 0.0) mode["matrix_sin"] = dump_mat(m.sin_amp);
    j["modes"].push_back(mode);
  }
  return j;
}

}  // namespace coefficient_io

}  // namespace homoscale

#endif  // HOMOSCALE_SNAPSHOT_HPP
