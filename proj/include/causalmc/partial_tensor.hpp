#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace causalmc {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/*
 * partial_tensor.hpp
 * ------------------
 * Partially observed outcome tensors (m x n x p, with p = 1 for plain
 * matrices) and the index-set algebra every imputation routine is built on:
 * the observed columns C(i) of a row, the observed rows R(j) of a column,
 * and their intersections over row/column sets. Observation is per (row,
 * column) cell: when p > 1 the whole fiber Y_ij in R^p is observed or
 * missing as a unit.
 */

class PartialTensor {
 public:
  PartialTensor() = default;

  PartialTensor(std::vector<Eigen::MatrixXd> slices, Mask mask,
                std::vector<std::string> row_labels = {},
                std::vector<std::string> col_labels = {})
      : slices_(std::move(slices)),
        mask_(std::move(mask)),
        row_labels_(std::move(row_labels)),
        col_labels_(std::move(col_labels)) {
    validate();
  }

  // Fully observed tensor.
  static PartialTensor dense(std::vector<Eigen::MatrixXd> slices,
                             std::vector<std::string> row_labels = {},
                             std::vector<std::string> col_labels = {}) {
    if (slices.empty()) throw std::invalid_argument("dense: no slices");
    Mask m = Mask::Constant(slices[0].rows(), slices[0].cols(), true);
    return PartialTensor(std::move(slices), std::move(m),
                         std::move(row_labels), std::move(col_labels));
  }

  static PartialTensor matrix(Eigen::MatrixXd values, Mask mask,
                              std::vector<std::string> row_labels = {},
                              std::vector<std::string> col_labels = {}) {
    std::vector<Eigen::MatrixXd> s;
    s.push_back(std::move(values));
    return PartialTensor(std::move(s), std::move(mask),
                         std::move(row_labels), std::move(col_labels));
  }

  Eigen::Index rows() const { return mask_.rows(); }
  Eigen::Index cols() const { return mask_.cols(); }
  Eigen::Index depth() const { return static_cast<Eigen::Index>(slices_.size()); }

  const Eigen::MatrixXd& slice(Eigen::Index k) const { return slices_.at(static_cast<size_t>(k)); }
  const std::vector<Eigen::MatrixXd>& slices() const { return slices_; }
  const Mask& mask() const { return mask_; }

  bool observed(Eigen::Index i, Eigen::Index j) const { return mask_(i, j); }

  Eigen::VectorXd fiber(Eigen::Index i, Eigen::Index j) const {
    Eigen::VectorXd f(depth());
    for (Eigen::Index k = 0; k < depth(); ++k) f[k] = slices_[static_cast<size_t>(k)](i, j);
    return f;
  }

  const std::vector<std::string>& row_labels() const { return row_labels_; }
  const std::vector<std::string>& col_labels() const { return col_labels_; }
  bool has_labels() const { return !row_labels_.empty() || !col_labels_.empty(); }

  std::string row_label(Eigen::Index i) const {
    if (i < static_cast<Eigen::Index>(row_labels_.size())) return row_labels_[static_cast<size_t>(i)];
    return "a" + std::to_string(i + 1);
  }
  std::string col_label(Eigen::Index j) const {
    if (j < static_cast<Eigen::Index>(col_labels_.size())) return col_labels_[static_cast<size_t>(j)];
    return "c" + std::to_string(j + 1);
  }

  Eigen::Index observed_count() const { return mask_.count(); }

 private:
  void validate() const {
    if (slices_.empty()) throw std::invalid_argument("PartialTensor: p must be >= 1");
    if (mask_.rows() < 1 || mask_.cols() < 1)
      throw std::invalid_argument("PartialTensor: m and n must be >= 1");
    for (const auto& s : slices_) {
      if (s.rows() != mask_.rows() || s.cols() != mask_.cols())
        throw std::invalid_argument("PartialTensor: slice shape does not match mask");
    }
    if (!row_labels_.empty() && static_cast<Eigen::Index>(row_labels_.size()) != mask_.rows())
      throw std::invalid_argument("PartialTensor: row label count mismatch");
    if (!col_labels_.empty() && static_cast<Eigen::Index>(col_labels_.size()) != mask_.cols())
      throw std::invalid_argument("PartialTensor: column label count mismatch");
    for (Eigen::Index i = 0; i < mask_.rows(); ++i)
      for (Eigen::Index j = 0; j < mask_.cols(); ++j)
        if (mask_(i, j))
          for (const auto& s : slices_)
            if (!std::isfinite(s(i, j)))
              throw std::invalid_argument("PartialTensor: non-finite observed value at (" +
                                          std::to_string(i) + "," + std::to_string(j) + ")");
  }

  std::vector<Eigen::MatrixXd> slices_;
  Mask mask_;
  std::vector<std::string> row_labels_;
  std::vector<std::string> col_labels_;
};

// Per-line observation maps: C(i) = observed columns of row i,
// R(j) = observed rows of column j. j in C(i)  <=>  i in R(j).
struct IndexSets {
  std::vector<std::vector<int>> cols_of_row;  // C(i)
  std::vector<std::vector<int>> rows_of_col;  // R(j)
};

inline IndexSets index_sets(const PartialTensor& t) {
  IndexSets s;
  s.cols_of_row.resize(static_cast<size_t>(t.rows()));
  s.rows_of_col.resize(static_cast<size_t>(t.cols()));
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t.observed(i, j)) {
        s.cols_of_row[static_cast<size_t>(i)].push_back(static_cast<int>(j));
        s.rows_of_col[static_cast<size_t>(j)].push_back(static_cast<int>(i));
      }
  return s;
}

namespace detail {
inline void check_indices(const std::vector<int>& idx, Eigen::Index bound, const char* what) {
  if (idx.empty()) throw std::invalid_argument(std::string(what) + ": empty index set");
  for (int v : idx)
    if (v < 0 || v >= bound) throw std::out_of_range(std::string(what) + ": index out of range");
}
}  // namespace detail

// C(R): columns observed in every row of `rows`.
inline std::vector<int> observed_cols(const PartialTensor& t, const std::vector<int>& rows) {
  detail::check_indices(rows, t.rows(), "observed_cols");
  std::vector<int> out;
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    bool all = true;
    for (int i : rows)
      if (!t.observed(i, j)) { all = false; break; }
    if (all) out.push_back(static_cast<int>(j));
  }
  return out;
}

// R(C): rows observed in every column of `cols`.
inline std::vector<int> observed_rows(const PartialTensor& t, const std::vector<int>& cols) {
  detail::check_indices(cols, t.cols(), "observed_rows");
  std::vector<int> out;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    bool all = true;
    for (int j : cols)
      if (!t.observed(i, j)) { all = false; break; }
    if (all) out.push_back(static_cast<int>(i));
  }
  return out;
}

// P_Omega: zero out entries at unobserved cells.
inline Eigen::MatrixXd project_omega(const PartialTensor& t, const Eigen::MatrixXd& full) {
  if (full.rows() != t.rows() || full.cols() != t.cols())
    throw std::invalid_argument("project_omega: shape mismatch");
  return t.mask().select(full.array(), 0.0).matrix();
}

inline PartialTensor transpose(const PartialTensor& t) {
  std::vector<Eigen::MatrixXd> slices;
  slices.reserve(static_cast<size_t>(t.depth()));
  for (Eigen::Index k = 0; k < t.depth(); ++k) slices.push_back(t.slice(k).transpose());
  return PartialTensor(std::move(slices), t.mask().transpose(),
                       t.col_labels(), t.row_labels());
}

}  // namespace causalmc
