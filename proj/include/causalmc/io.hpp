#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalmc/estimators.hpp"
#include "causalmc/partial_tensor.hpp"
#include "causalmc/patterns.hpp"
#include "causalmc/scm.hpp"

namespace causalmc {

/*
 * io.hpp
 * ------
 * File formats:
 *  - matrix CSV: first row column labels, first column row labels, empty
 *    cell = missing;
 *  - tensor manifest (JSON): per-coordinate CSV files in coordinate order;
 *  - mask CSV: same label conventions, cells 1/0;
 *  - SCM design file (JSON): nodes, weighted edges, noise, actions,
 *    contexts, observed variables;
 *  - samples manifest (JSON): (mean, var, ns) CSV triple;
 *  - experiment config (JSON).
 */

namespace io {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_number(const std::string& cell, const std::string& file, size_t line,
                           size_t col) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0')
    throw std::runtime_error(file + ":" + std::to_string(line) + ": column " +
                             std::to_string(col) + ": cannot parse '" + cell + "' as a number");
  return v;
}

struct CsvGrid {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<std::string>> cells;
};

inline CsvGrid read_csv_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  CsvGrid grid;
  std::string line;
  size_t lineno = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() && lineno > 1) continue;
    auto cells = split_csv_line(line);
    if (lineno == 1) {
      if (cells.size() < 2)
        throw std::runtime_error(path + ":1: header must contain at least one column label");
      grid.col_labels.assign(cells.begin() + 1, cells.end());
      width = cells.size();
      continue;
    }
    if (cells.size() != width)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(width) + " cells, found " +
                               std::to_string(cells.size()));
    grid.row_labels.push_back(cells[0]);
    grid.cells.emplace_back(cells.begin() + 1, cells.end());
  }
  if (grid.cells.empty()) throw std::runtime_error(path + ": no data rows");
  return grid;
}

}  // namespace detail

// Matrix CSV -> PartialTensor (p = 1). Empty cells become missing entries.
inline PartialTensor read_matrix_csv(const std::string& path) {
  const auto grid = detail::read_csv_grid(path);
  const Eigen::Index m = static_cast<Eigen::Index>(grid.cells.size());
  const Eigen::Index n = static_cast<Eigen::Index>(grid.col_labels.size());
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(m, n);
  Mask mask = Mask::Constant(m, n, false);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::string& cell = grid.cells[static_cast<size_t>(i)][static_cast<size_t>(j)];
      if (cell.empty()) continue;
      values(i, j) = detail::parse_number(cell, path, static_cast<size_t>(i) + 2,
                                          static_cast<size_t>(j) + 2);
      mask(i, j) = true;
    }
  return PartialTensor::matrix(std::move(values), std::move(mask), grid.row_labels,
                               grid.col_labels);
}

// One slice of a tensor to CSV, masking unobserved cells as empty.
inline void write_matrix_csv(const std::string& path, const PartialTensor& t,
                             Eigen::Index slice = 0) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "id";
  for (Eigen::Index j = 0; j < t.cols(); ++j) out << "," << t.col_label(j);
  out << "\n";
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    out << t.row_label(i);
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      out << ",";
      if (t.observed(i, j)) out << format_double(t.slice(slice)(i, j));
    }
    out << "\n";
  }
}

inline void write_dense_csv(const std::string& path, const Eigen::MatrixXd& m,
                            const std::vector<std::string>& row_labels = {},
                            const std::vector<std::string>& col_labels = {}) {
  write_matrix_csv(path, PartialTensor::matrix(m, Mask::Constant(m.rows(), m.cols(), true),
                                               row_labels, col_labels));
}

inline Mask read_mask_csv(const std::string& path) {
  const PartialTensor t = read_matrix_csv(path);
  Mask mask(t.rows(), t.cols());
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      if (!t.observed(i, j))
        throw std::runtime_error(path + ": mask cells must be 0 or 1, found an empty cell");
      const double v = t.slice(0)(i, j);
      if (v != 0.0 && v != 1.0)
        throw std::runtime_error(path + ": mask cells must be 0 or 1");
      mask(i, j) = v == 1.0;
    }
  return mask;
}

inline void write_mask_csv(const std::string& path, const Mask& mask,
                           const std::vector<std::string>& row_labels = {},
                           const std::vector<std::string>& col_labels = {}) {
  Eigen::MatrixXd m = mask.select(Eigen::ArrayXXd::Ones(mask.rows(), mask.cols()), 0.0).matrix();
  write_dense_csv(path, m, row_labels, col_labels);
}

namespace detail {
inline std::string sibling_path(const std::string& manifest_path, const std::string& rel) {
  namespace fs = std::filesystem;
  fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(manifest_path).parent_path() / p).string();
}
}  // namespace detail

// Tensor manifest: {"slices": ["y_1.csv", ...]} with paths relative to the
// manifest. All slice files must agree on labels and missing cells.
inline PartialTensor read_tensor_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  if (!j.contains("slices") || !j["slices"].is_array() || j["slices"].empty())
    throw std::runtime_error(path + ": manifest must list at least one slice file");
  std::vector<Eigen::MatrixXd> slices;
  std::optional<PartialTensor> first;
  for (const auto& rel : j["slices"]) {
    PartialTensor t = read_matrix_csv(detail::sibling_path(path, rel.get<std::string>()));
    if (!first) {
      first = t;
    } else {
      if (t.rows() != first->rows() || t.cols() != first->cols())
        throw std::runtime_error(path + ": slice shapes disagree");
      if ((t.mask() != first->mask()).any())
        throw std::runtime_error(path + ": slice masks disagree (fibers must be observed whole)");
      if (t.row_labels() != first->row_labels() || t.col_labels() != first->col_labels())
        throw std::runtime_error(path + ": slice labels disagree");
    }
    slices.push_back(t.slice(0));
  }
  return PartialTensor(std::move(slices), first->mask(), first->row_labels(),
                       first->col_labels());
}

// Writes one CSV per coordinate plus the manifest; slice file names derive
// from the manifest name.
inline void write_tensor_manifest(const std::string& manifest_path, const PartialTensor& t,
                                  const std::vector<std::string>& slice_names = {}) {
  namespace fs = std::filesystem;
  const fs::path base(manifest_path);
  const std::string stem = base.stem().string();
  nlohmann::json j;
  j["slices"] = nlohmann::json::array();
  for (Eigen::Index k = 0; k < t.depth(); ++k) {
    const std::string name =
        k < static_cast<Eigen::Index>(slice_names.size())
            ? stem + "_" + slice_names[static_cast<size_t>(k)] + ".csv"
            : stem + "_" + std::to_string(k + 1) + ".csv";
    write_matrix_csv((base.parent_path() / name).string(), t, k);
    j["slices"].push_back(name);
  }
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write '" + manifest_path + "'");
  out << j.dump(2) << "\n";
}

// Loads either a plain matrix CSV or a tensor manifest, keyed by extension.
inline PartialTensor load_tensor(const std::string& path) {
  if (std::filesystem::path(path).extension() == ".json") return read_tensor_manifest(path);
  return read_matrix_csv(path);
}

struct DesignFile {
  CounterfactualDesign design;
  std::vector<std::string> node_names;
  std::vector<std::string> outcome_names;  // names of the observed nodes
};

// SCM design file. Example:
// {
//   "nodes": ["Z1", "Z2"],
//   "edges": [["Z1", "Z2", 1.0]],
//   "noise_mean": [0, 0],
//   "noise_var": [1, 1],
//   "observed": ["Z1", "Z2"],
//   "actions": [{"do": {"Z1": 1.0}},
//               {"soft": [{"node": "Z2", "parents": {"Z1": 0.5},
//                          "noise_mean": 0.0, "noise_var": 1.0}]}],
//   "contexts": [{"condition": {"Z1": 1.0, "Z2": 0.0}}]
// }
inline DesignFile read_design(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }

  DesignFile out;
  if (!j.contains("nodes")) throw std::runtime_error(path + ": missing 'nodes'");
  if (j["nodes"].is_number_integer()) {
    const int q = j["nodes"].get<int>();
    for (int k = 1; k <= q; ++k) out.node_names.push_back("Z" + std::to_string(k));
  } else {
    out.node_names = j["nodes"].get<std::vector<std::string>>();
  }
  const Eigen::Index q = static_cast<Eigen::Index>(out.node_names.size());
  std::map<std::string, int> index;
  for (size_t k = 0; k < out.node_names.size(); ++k) {
    if (index.count(out.node_names[k]))
      throw std::runtime_error(path + ": duplicate node name '" + out.node_names[k] + "'");
    index[out.node_names[k]] = static_cast<int>(k);
  }
  auto node = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error(path + ": unknown node '" + name + "'");
    return it->second;
  };

  LinearGaussianSCM scm;
  scm.weights = Eigen::MatrixXd::Zero(q, q);
  for (const auto& e : j.value("edges", nlohmann::json::array())) {
    if (!e.is_array() || e.size() != 3)
      throw std::runtime_error(path + ": edges must be [from, to, weight] triples");
    const int from = node(e[0].get<std::string>());
    const int to = node(e[1].get<std::string>());
    scm.weights(to, from) = e[2].get<double>();
  }
  scm.noise_mean = Eigen::VectorXd::Zero(q);
  scm.noise_var = Eigen::VectorXd::Ones(q);
  if (j.contains("noise_mean")) {
    const auto v = j["noise_mean"].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != q)
      throw std::runtime_error(path + ": noise_mean length mismatch");
    for (Eigen::Index k = 0; k < q; ++k) scm.noise_mean[k] = v[static_cast<size_t>(k)];
  }
  if (j.contains("noise_var")) {
    const auto v = j["noise_var"].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != q)
      throw std::runtime_error(path + ": noise_var length mismatch");
    for (Eigen::Index k = 0; k < q; ++k) scm.noise_var[k] = v[static_cast<size_t>(k)];
  }
  out.design.scm = std::move(scm);

  if (!j.contains("observed")) throw std::runtime_error(path + ": missing 'observed'");
  for (const auto& name : j["observed"]) {
    out.design.observed.push_back(node(name.get<std::string>()));
    out.outcome_names.push_back(name.get<std::string>());
  }

  if (!j.contains("actions")) throw std::runtime_error(path + ": missing 'actions'");
  for (const auto& a : j["actions"]) {
    Intervention iv;
    if (a.contains("do")) {
      std::vector<int> nodes;
      std::vector<double> values;
      for (const auto& [name, value] : a["do"].items()) {
        nodes.push_back(node(name));
        values.push_back(value.get<double>());
      }
      Eigen::VectorXd vals(static_cast<Eigen::Index>(values.size()));
      for (size_t k = 0; k < values.size(); ++k) vals[static_cast<Eigen::Index>(k)] = values[k];
      iv = Intervention::do_values(nodes, vals, q);
    }
    if (a.contains("soft")) {
      for (const auto& s : a["soft"]) {
        iv.targets.push_back(node(s.at("node").get<std::string>()));
        Eigen::VectorXd row = Eigen::VectorXd::Zero(q);
        const nlohmann::json parents = s.value("parents", nlohmann::json::object());
        for (const auto& [pname, w] : parents.items()) row[node(pname)] = w.get<double>();
        iv.new_rows.conservativeResize(static_cast<Eigen::Index>(iv.targets.size()), q);
        iv.new_rows.row(static_cast<Eigen::Index>(iv.targets.size()) - 1) = row;
        iv.new_noise_mean.conservativeResize(static_cast<Eigen::Index>(iv.targets.size()));
        iv.new_noise_mean[static_cast<Eigen::Index>(iv.targets.size()) - 1] =
            s.value("noise_mean", 0.0);
        iv.new_noise_var.conservativeResize(static_cast<Eigen::Index>(iv.targets.size()));
        iv.new_noise_var[static_cast<Eigen::Index>(iv.targets.size()) - 1] =
            s.value("noise_var", 1.0);
      }
    }
    if (!a.contains("do") && !a.contains("soft") && !a.empty())
      throw std::runtime_error(path + ": action must use 'do' and/or 'soft'");
    out.design.actions.push_back(std::move(iv));
  }

  if (!j.contains("contexts")) throw std::runtime_error(path + ": missing 'contexts'");
  for (const auto& c : j["contexts"]) {
    Context ctx;
    std::vector<double> values;
    const nlohmann::json cond = c.value("condition", nlohmann::json::object());
    for (const auto& [name, value] : cond.items()) {
      ctx.cond_nodes.push_back(node(name));
      values.push_back(value.get<double>());
    }
    ctx.cond_values = Eigen::VectorXd(static_cast<Eigen::Index>(values.size()));
    for (size_t k = 0; k < values.size(); ++k)
      ctx.cond_values[static_cast<Eigen::Index>(k)] = values[k];
    out.design.contexts.push_back(std::move(ctx));
  }

  out.design.validate();
  return out;
}

// Samples manifest: {"mean": "means.csv", "var": "vars.csv", "ns": 100}.
inline SampleStats read_samples_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  const PartialTensor means = read_matrix_csv(detail::sibling_path(path, j.at("mean").get<std::string>()));
  const PartialTensor vars = read_matrix_csv(detail::sibling_path(path, j.at("var").get<std::string>()));
  if (means.rows() != vars.rows() || means.cols() != vars.cols())
    throw std::runtime_error(path + ": mean/var shapes disagree");
  if ((means.mask() != vars.mask()).any())
    throw std::runtime_error(path + ": mean/var masks disagree");
  SampleStats s;
  s.means = means.slice(0);
  s.vars = vars.slice(0);
  s.ns = j.at("ns").get<int>();
  s.mask = means.mask();
  return s;
}

inline void write_samples_manifest(const std::string& path, const SampleStats& s,
                                   const std::vector<std::string>& row_labels = {},
                                   const std::vector<std::string>& col_labels = {}) {
  namespace fs = std::filesystem;
  const fs::path base(path);
  const std::string stem = base.stem().string();
  const std::string mean_name = stem + "_mean.csv";
  const std::string var_name = stem + "_var.csv";
  write_matrix_csv((base.parent_path() / mean_name).string(),
                   PartialTensor::matrix(s.means, s.mask, row_labels, col_labels));
  write_matrix_csv((base.parent_path() / var_name).string(),
                   PartialTensor::matrix(s.vars, s.mask, row_labels, col_labels));
  nlohmann::json j;
  j["mean"] = mean_name;
  j["var"] = var_name;
  j["ns"] = s.ns;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace io

}  // namespace causalmc
