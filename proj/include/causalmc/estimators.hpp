#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "causalmc/partial_tensor.hpp"

namespace causalmc {

/*
 * estimators.hpp
 * --------------
 * The matrix/tensor completion estimators operating on PartialTensor:
 * row/column means, two-way fixed effects, cosine-similarity collaborative
 * filtering, synthetic-interventions regression (both directions, matrix
 * and tensor modes), centered SI variants, nuclear-norm minimization with
 * and without fixed effects, and a truncated-SVD oracle.
 *
 * All estimators are pure functions of (tensor, config). Entries whose
 * training data is empty are reported as failures, never filled with 0.
 */

enum class Method {
  mean_over_contexts,
  mean_over_actions,
  fixed_effects,
  collaborative_filtering,
  synthetic_interventions,
  si_centered,
  nnm,
  nnm_fe,
  truncated_svd_oracle,
};

enum class Direction { within_rows, within_columns };
enum class Centering { none, mean_over_contexts, fixed_effects };

struct EstimatorConfig {
  Method method = Method::synthetic_interventions;
  Direction direction = Direction::within_rows;
  Centering centering = Centering::none;
  std::optional<int> k_neighbors;  // collaborative filtering
  double lambda = 0.0;             // nuclear norm family
  int rank = 1;                    // truncated SVD oracle
  double tol = 1e-7;
  int max_iter = 500;
  double pinv_rcond = 1e-10;       // relative singular value cutoff

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("EstimatorConfig: tol must be > 0");
    if (lambda < 0.0) throw std::invalid_argument("EstimatorConfig: lambda must be >= 0");
    if (max_iter < 1) throw std::invalid_argument("EstimatorConfig: max_iter must be >= 1");
    if (!(pinv_rcond > 0.0)) throw std::invalid_argument("EstimatorConfig: pinv_rcond must be > 0");
    if (k_neighbors && *k_neighbors < 1)
      throw std::invalid_argument("EstimatorConfig: k_neighbors must be >= 1");
    if (rank < 1) throw std::invalid_argument("EstimatorConfig: rank must be >= 1");
  }
};

struct EntryDiagnostics {
  int i = 0, j = 0;
  int rank = 0;        // regression rank after the singular value cutoff
  double residual = 0; // training residual norm
};

struct EntryFailure {
  int i = 0, j = 0;
  std::string reason;
};

struct SolverDiagnostics {
  int iterations = 0;
  double objective = 0.0;
  bool converged = true;
  std::vector<double> objective_history;
};

struct ImputationResult {
  std::vector<Eigen::MatrixXd> predictions;  // dense m x n per coordinate
  Mask imputed_mask;                         // cells actually predicted
  std::vector<EntryDiagnostics> entry_info;
  std::vector<EntryFailure> failures;
  std::optional<SolverDiagnostics> solver;
  std::optional<Eigen::MatrixXd> low_rank_fit;  // NNM family: the fitted L

  Eigen::VectorXd prediction(Eigen::Index i, Eigen::Index j) const {
    Eigen::VectorXd f(static_cast<Eigen::Index>(predictions.size()));
    for (size_t k = 0; k < predictions.size(); ++k) f[static_cast<Eigen::Index>(k)] = predictions[k](i, j);
    return f;
  }
};

inline ImputationResult transpose(const ImputationResult& r) {
  ImputationResult out;
  for (const auto& s : r.predictions) out.predictions.push_back(s.transpose());
  out.imputed_mask = r.imputed_mask.transpose();
  out.entry_info = r.entry_info;
  for (auto& e : out.entry_info) std::swap(e.i, e.j);
  out.failures = r.failures;
  for (auto& f : out.failures) std::swap(f.i, f.j);
  out.solver = r.solver;
  if (r.low_rank_fit) out.low_rank_fit = r.low_rank_fit->transpose();
  return out;
}

namespace detail {

inline Eigen::MatrixXd mask_as_double(const Mask& m) {
  return m.select(Eigen::ArrayXXd::Ones(m.rows(), m.cols()), 0.0).matrix();
}

inline ImputationResult passthrough_result(const PartialTensor& t) {
  ImputationResult r;
  for (Eigen::Index k = 0; k < t.depth(); ++k) r.predictions.push_back(t.slice(k));
  r.imputed_mask = !t.mask();
  return r;
}

inline void fail_entry(ImputationResult& r, Eigen::Index i, Eigen::Index j, std::string reason) {
  r.imputed_mask(i, j) = false;
  for (auto& s : r.predictions) s(i, j) = std::numeric_limits<double>::quiet_NaN();
  r.failures.push_back({static_cast<int>(i), static_cast<int>(j), std::move(reason)});
}

}  // namespace detail

// Row-mean surface, defined at every cell of a row with at least one
// observed entry (NaN otherwise).
inline std::vector<Eigen::MatrixXd> mean_over_contexts_surface(const PartialTensor& t) {
  const Eigen::MatrixXd md = detail::mask_as_double(t.mask());
  const Eigen::VectorXd counts = md.rowwise().sum();
  std::vector<Eigen::MatrixXd> out;
  for (Eigen::Index k = 0; k < t.depth(); ++k) {
    const Eigen::VectorXd sums = (t.slice(k).array() * md.array()).rowwise().sum();
    Eigen::MatrixXd s(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      s.row(i).setConstant(counts[i] > 0 ? sums[i] / counts[i]
                                         : std::numeric_limits<double>::quiet_NaN());
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Eigen::MatrixXd> mean_over_actions_surface(const PartialTensor& t) {
  auto s = mean_over_contexts_surface(transpose(t));
  for (auto& m : s) m.transposeInPlace();
  return s;
}

// Two-way fixed-effect surface: row mean + column mean - mean over the
// observed cells of the rectangle R(j) x C(i). Cells whose rectangle has no
// observed entry get NaN.
inline std::vector<Eigen::MatrixXd> fixed_effects_surface(const PartialTensor& t) {
  const Eigen::MatrixXd md = detail::mask_as_double(t.mask());
  const Eigen::VectorXd row_counts = md.rowwise().sum();
  const Eigen::VectorXd col_counts = md.colwise().sum();
  // rect_count[i,j] = #{(i',j') observed : i' in R(j), j' in C(i)}
  const Eigen::MatrixXd rect_counts = md * md.transpose() * md;
  std::vector<Eigen::MatrixXd> out;
  for (Eigen::Index k = 0; k < t.depth(); ++k) {
    const Eigen::MatrixXd vm = (t.slice(k).array() * md.array()).matrix();
    const Eigen::VectorXd row_sums = vm.rowwise().sum();
    const Eigen::VectorXd col_sums = vm.colwise().sum();
    const Eigen::MatrixXd rect_sums = md * vm.transpose() * md;
    Eigen::MatrixXd s(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        if (row_counts[i] > 0 && col_counts[j] > 0 && rect_counts(i, j) > 0)
          s(i, j) = row_sums[i] / row_counts[i] + col_sums[j] / col_counts[j] -
                    rect_sums(i, j) / rect_counts(i, j);
        else
          s(i, j) = std::numeric_limits<double>::quiet_NaN();
      }
    out.push_back(std::move(s));
  }
  return out;
}

inline ImputationResult impute_mean_over_contexts(const PartialTensor& t) {
  ImputationResult r = detail::passthrough_result(t);
  const auto surface = mean_over_contexts_surface(t);
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (!t.observed(i, j)) {
        if (!std::isfinite(surface[0](i, j)))
          throw std::runtime_error("mean_over_contexts: row '" + t.row_label(i) +
                                   "' has no observed entries");
        for (Eigen::Index k = 0; k < t.depth(); ++k)
          r.predictions[static_cast<size_t>(k)](i, j) = surface[static_cast<size_t>(k)](i, j);
      }
  return r;
}

inline ImputationResult impute_mean_over_actions(const PartialTensor& t) {
  ImputationResult r = detail::passthrough_result(t);
  const auto surface = mean_over_actions_surface(t);
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (!t.observed(i, j)) {
        if (!std::isfinite(surface[0](i, j)))
          throw std::runtime_error("mean_over_actions: column '" + t.col_label(j) +
                                   "' has no observed entries");
        for (Eigen::Index k = 0; k < t.depth(); ++k)
          r.predictions[static_cast<size_t>(k)](i, j) = surface[static_cast<size_t>(k)](i, j);
      }
  return r;
}

inline ImputationResult impute_fixed_effects(const PartialTensor& t) {
  ImputationResult r = detail::passthrough_result(t);
  const Eigen::MatrixXd md = detail::mask_as_double(t.mask());
  const Eigen::VectorXd row_counts = md.rowwise().sum();
  const Eigen::VectorXd col_counts = md.colwise().sum();
  const auto surface = fixed_effects_surface(t);
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (!t.observed(i, j)) {
        if (row_counts[i] == 0)
          throw std::runtime_error("fixed_effects: row '" + t.row_label(i) +
                                   "' has no observed entries");
        if (col_counts[j] == 0)
          throw std::runtime_error("fixed_effects: column '" + t.col_label(j) +
                                   "' has no observed entries");
        if (!std::isfinite(surface[0](i, j))) {
          detail::fail_entry(r, i, j, "no observed entries in the correction rectangle");
          continue;
        }
        for (Eigen::Index k = 0; k < t.depth(); ++k)
          r.predictions[static_cast<size_t>(k)](i, j) = surface[static_cast<size_t>(k)](i, j);
      }
  return r;
}

namespace detail {

// Cosine similarity between columns a and b over their common observed
// rows, stacking outcome coordinates. Returns 0 when the common support is
// empty or either restricted column has zero norm.
inline double column_cosine(const PartialTensor& t, Eigen::Index a, Eigen::Index b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    if (t.observed(i, a) && t.observed(i, b)) {
      any = true;
      for (Eigen::Index k = 0; k < t.depth(); ++k) {
        const double x = t.slice(k)(i, a);
        const double y = t.slice(k)(i, b);
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
    }
  if (!any || na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline ImputationResult impute_cf_rows(const PartialTensor& t, const EstimatorConfig& cfg) {
  ImputationResult r = passthrough_result(t);
  const IndexSets sets = index_sets(t);
  // Pairwise column similarities, filled on demand.
  Eigen::MatrixXd sim = Eigen::MatrixXd::Constant(t.cols(), t.cols(),
                                                  std::numeric_limits<double>::quiet_NaN());
  auto similarity = [&](Eigen::Index a, Eigen::Index b) {
    if (std::isnan(sim(a, b))) {
      sim(a, b) = column_cosine(t, a, b);
      sim(b, a) = sim(a, b);
    }
    return sim(a, b);
  };
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    const auto& donors = sets.cols_of_row[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      if (t.observed(i, j)) continue;
      if (donors.empty()) {
        fail_entry(r, i, j, "no observed entries in row");
        continue;
      }
      std::vector<std::pair<int, double>> weighted;
      for (int jp : donors) {
        const double w = similarity(jp, j);
        if (w != 0.0) weighted.emplace_back(jp, w);
      }
      if (cfg.k_neighbors && static_cast<int>(weighted.size()) > *cfg.k_neighbors) {
        // Stable: ties in |similarity| keep the lower column index.
        std::stable_sort(weighted.begin(), weighted.end(),
                         [](const auto& a, const auto& b) {
                           return std::abs(a.second) > std::abs(b.second);
                         });
        weighted.resize(static_cast<size_t>(*cfg.k_neighbors));
      }
      double total = 0.0;
      for (const auto& [jp, w] : weighted) total += std::abs(w);
      if (total <= 0.0) {
        fail_entry(r, i, j, "zero total similarity weight");
        continue;
      }
      for (Eigen::Index k = 0; k < t.depth(); ++k) {
        double acc = 0.0;
        for (const auto& [jp, w] : weighted) acc += w * t.slice(k)(i, jp);
        r.predictions[static_cast<size_t>(k)](i, j) = acc / total;
      }
    }
  }
  return r;
}

}  // namespace detail

inline ImputationResult impute_collaborative_filtering(const PartialTensor& t,
                                                       const EstimatorConfig& cfg) {
  cfg.validate();
  if (cfg.direction == Direction::within_columns)
    return transpose(detail::impute_cf_rows(transpose(t), cfg));
  return detail::impute_cf_rows(t, cfg);
}

namespace detail {

// Pseudoinverse with a relative singular value cutoff; also reports the
// retained rank.
inline Eigen::MatrixXd cutoff_pinv(const Eigen::MatrixXd& a, double rcond, int* rank_out) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? rcond * sv[0] : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  int rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv[k] > cutoff && sv[k] > 0.0) {
      inv[k] = 1.0 / sv[k];
      ++rank;
    }
  if (rank_out) *rank_out = rank;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Synthetic interventions, regressing the target column on the donor
// columns C(i) over the anchor rows R(C(i) u {j}). In tensor mode the p
// outcome coordinates of each anchor row are stacked, so the regression is
// solved over (|anchors| * p) equations. Training systems are cached by
// their (donor, anchor) index sets: under block-structured masks most
// missing entries share one system.
inline ImputationResult impute_si_rows(const PartialTensor& t, const EstimatorConfig& cfg) {
  ImputationResult r = passthrough_result(t);
  const IndexSets sets = index_sets(t);
  const Eigen::Index p = t.depth();

  struct CachedSystem {
    Eigen::MatrixXd design;  // (|anchors| * p) x |donors|
    Eigen::MatrixXd pinv;    // |donors| x (|anchors| * p)
    int rank = 0;
  };
  std::map<std::vector<int>, CachedSystem> cache;

  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    const auto& donors = sets.cols_of_row[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      if (t.observed(i, j)) continue;
      if (donors.empty()) {
        fail_entry(r, i, j, "no observed entries in row");
        continue;
      }
      // Anchor rows: observed at the target column and at every donor.
      std::vector<int> anchors;
      for (int ip : sets.rows_of_col[static_cast<size_t>(j)]) {
        bool all = true;
        for (int jp : donors)
          if (!t.observed(ip, jp)) { all = false; break; }
        if (all) anchors.push_back(ip);
      }
      if (anchors.empty()) {
        fail_entry(r, i, j, "empty training set");
        continue;
      }

      std::vector<int> key;
      key.reserve(donors.size() + anchors.size() + 1);
      key.insert(key.end(), donors.begin(), donors.end());
      key.push_back(-1);
      key.insert(key.end(), anchors.begin(), anchors.end());
      auto it = cache.find(key);
      if (it == cache.end()) {
        const Eigen::Index rows = static_cast<Eigen::Index>(anchors.size()) * p;
        Eigen::MatrixXd a(rows, static_cast<Eigen::Index>(donors.size()));
        for (Eigen::Index k = 0; k < p; ++k)
          for (size_t ai = 0; ai < anchors.size(); ++ai)
            for (size_t d = 0; d < donors.size(); ++d)
              a(k * static_cast<Eigen::Index>(anchors.size()) + static_cast<Eigen::Index>(ai),
                static_cast<Eigen::Index>(d)) = t.slice(k)(anchors[ai], donors[d]);
        CachedSystem sys;
        sys.pinv = cutoff_pinv(a, cfg.pinv_rcond, &sys.rank);
        sys.design = std::move(a);
        it = cache.emplace(std::move(key), std::move(sys)).first;
      }

      Eigen::VectorXd b(static_cast<Eigen::Index>(anchors.size()) * p);
      for (Eigen::Index k = 0; k < p; ++k)
        for (size_t ai = 0; ai < anchors.size(); ++ai)
          b[k * static_cast<Eigen::Index>(anchors.size()) + static_cast<Eigen::Index>(ai)] =
              t.slice(k)(anchors[ai], j);
      const Eigen::VectorXd beta = it->second.pinv * b;

      for (Eigen::Index k = 0; k < t.depth(); ++k) {
        double acc = 0.0;
        for (size_t d = 0; d < donors.size(); ++d) acc += t.slice(k)(i, donors[d]) * beta[static_cast<Eigen::Index>(d)];
        r.predictions[static_cast<size_t>(k)](i, j) = acc;
      }

      EntryDiagnostics diag;
      diag.i = static_cast<int>(i);
      diag.j = static_cast<int>(j);
      diag.rank = it->second.rank;
      diag.residual = (it->second.design * beta - b).norm();
      r.entry_info.push_back(diag);
    }
  }
  return r;
}

}  // namespace detail

inline ImputationResult impute_synthetic_interventions(const PartialTensor& t,
                                                       const EstimatorConfig& cfg) {
  cfg.validate();
  if (cfg.direction == Direction::within_columns)
    return transpose(detail::impute_si_rows(transpose(t), cfg));
  return detail::impute_si_rows(t, cfg);
}

// Centered SI: subtract a baseline surface (row means or two-way fixed
// effects), run SI on the residual, add the surface back.
inline ImputationResult impute_si_centered(const PartialTensor& t, const EstimatorConfig& cfg) {
  cfg.validate();
  if (cfg.centering == Centering::none)
    throw std::invalid_argument("impute_si_centered: centering must be mean_over_contexts or fixed_effects");
  const auto surface = cfg.centering == Centering::mean_over_contexts
                           ? mean_over_contexts_surface(t)
                           : fixed_effects_surface(t);
  std::vector<Eigen::MatrixXd> centered;
  for (Eigen::Index k = 0; k < t.depth(); ++k) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j)
        if (t.observed(i, j)) {
          const double g = surface[static_cast<size_t>(k)](i, j);
          if (!std::isfinite(g))
            throw std::runtime_error("impute_si_centered: centering surface undefined at an observed cell");
          d(i, j) = t.slice(k)(i, j) - g;
        }
    centered.push_back(std::move(d));
  }
  PartialTensor residual(std::move(centered), t.mask(), t.row_labels(), t.col_labels());
  ImputationResult si = impute_synthetic_interventions(residual, cfg);

  ImputationResult r = detail::passthrough_result(t);
  r.entry_info = si.entry_info;
  r.failures = si.failures;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (!t.observed(i, j)) {
        if (!si.imputed_mask(i, j)) {
          r.imputed_mask(i, j) = false;
          for (auto& s : r.predictions) s(i, j) = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        const double g0 = surface[0](i, j);
        if (!std::isfinite(g0)) {
          detail::fail_entry(r, i, j, "centering surface undefined");
          continue;
        }
        for (Eigen::Index k = 0; k < t.depth(); ++k)
          r.predictions[static_cast<size_t>(k)](i, j) =
              surface[static_cast<size_t>(k)](i, j) + si.predictions[static_cast<size_t>(k)](i, j);
      }
  return r;
}

namespace detail {

// Soft singular value thresholding: shrink every singular value by tau,
// flooring at zero.
inline Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double tau, double* nuclear_norm_out) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd sv = (svd.singularValues().array() - tau).cwiseMax(0.0);
  if (nuclear_norm_out) *nuclear_norm_out = sv.sum();
  return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

inline double nnm_objective(const PartialTensor& t, const Eigen::MatrixXd& l, double lambda,
                            double nuclear_norm) {
  double fit = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t.observed(i, j)) {
        const double d = t.slice(0)(i, j) - l(i, j);
        fit += d * d;
      }
  return 0.5 * fit + lambda * nuclear_norm;
}

}  // namespace detail

// Nuclear norm minimization,
//   argmin_L 0.5 * ||P_Omega(Y - L)||_F^2 + lambda * ||L||_*,
// solved by soft-impute: L <- SVT_lambda(P_Omega(Y) + P_notOmega(L)). The
// objective is nonincreasing across iterations (asserted in debug builds
// and recorded in the diagnostics).
inline ImputationResult impute_nnm(const PartialTensor& t, const EstimatorConfig& cfg,
                                   const std::optional<Eigen::MatrixXd>& warm_start = std::nullopt) {
  cfg.validate();
  if (t.depth() != 1) throw std::invalid_argument("impute_nnm: matrix case only (p = 1)");
  const Eigen::MatrixXd observed = project_omega(t, t.slice(0));
  Eigen::MatrixXd l = warm_start ? *warm_start : Eigen::MatrixXd::Zero(t.rows(), t.cols());
  if (l.rows() != t.rows() || l.cols() != t.cols())
    throw std::invalid_argument("impute_nnm: warm start shape mismatch");

  SolverDiagnostics diag;
  diag.converged = false;
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iter; ++it) {
    const Eigen::MatrixXd filled =
        observed + (!t.mask()).select(l.array(), 0.0).matrix();
    double nuc = 0.0;
    Eigen::MatrixXd next = detail::svt(filled, cfg.lambda, &nuc);
    const double obj = detail::nnm_objective(t, next, cfg.lambda, nuc);
    assert(obj <= prev_obj + 1e-9 * (1.0 + std::abs(prev_obj)) &&
           "soft-impute objective must not increase");
    diag.objective_history.push_back(obj);
    const double change = (next - l).norm() / std::max(1.0, l.norm());
    l = std::move(next);
    diag.iterations = it + 1;
    diag.objective = obj;
    prev_obj = obj;
    if (change <= cfg.tol) {
      diag.converged = true;
      break;
    }
  }

  ImputationResult r = detail::passthrough_result(t);
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (!t.observed(i, j)) r.predictions[0](i, j) = l(i, j);
  r.solver = std::move(diag);
  r.low_rank_fit = std::move(l);
  return r;
}

// Nuclear norm minimization with unpenalized fixed effects,
//   argmin_{L,G,D} (1/|Omega|) ||P_Omega(Y - L - G 1^T - 1 D^T)||_F^2 + lambda ||L||_*,
// by block-coordinate descent: exact two-way-means fit of (G, D) given L,
// then one soft-impute step on the de-trended matrix (the 1/|Omega| scaling
// makes the effective threshold lambda * |Omega| / 2).
inline ImputationResult impute_nnm_fe(const PartialTensor& t, const EstimatorConfig& cfg) {
  cfg.validate();
  if (t.depth() != 1) throw std::invalid_argument("impute_nnm_fe: matrix case only (p = 1)");
  const Eigen::Index m = t.rows(), n = t.cols();
  const Eigen::MatrixXd md = detail::mask_as_double(t.mask());
  const Eigen::VectorXd row_counts = md.rowwise().sum();
  const Eigen::VectorXd col_counts = md.colwise().sum();
  const double omega = md.sum();
  if (omega <= 0.0) throw std::invalid_argument("impute_nnm_fe: no observed entries");
  const Eigen::MatrixXd y = t.slice(0);

  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);

  auto fit_fixed_effects = [&](const Eigen::MatrixXd& resid) {
    // Alternating exact row/column mean updates of the two-way LS problem.
    for (int it = 0; it < 500; ++it) {
      Eigen::VectorXd g_new(m), d_new(n);
      for (Eigen::Index i = 0; i < m; ++i) {
        if (row_counts[i] == 0) { g_new[i] = 0.0; continue; }
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
          if (t.observed(i, j)) acc += resid(i, j) - delta[j];
        g_new[i] = acc / row_counts[i];
      }
      const double gchange = (g_new - gamma).lpNorm<Eigen::Infinity>();
      gamma = g_new;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (col_counts[j] == 0) { d_new[j] = 0.0; continue; }
        double acc = 0.0;
        for (Eigen::Index i = 0; i < m; ++i)
          if (t.observed(i, j)) acc += resid(i, j) - gamma[i];
        d_new[j] = acc / col_counts[j];
      }
      const double dchange = (d_new - delta).lpNorm<Eigen::Infinity>();
      delta = d_new;
      if (std::max(gchange, dchange) < 1e-12 * (1.0 + resid.cwiseAbs().maxCoeff())) break;
    }
  };

  auto objective = [&](double nuclear) {
    double fit = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (t.observed(i, j)) {
          const double d = y(i, j) - l(i, j) - gamma[i] - delta[j];
          fit += d * d;
        }
    return fit / omega + cfg.lambda * nuclear;
  };

  SolverDiagnostics diag;
  diag.converged = false;
  double prev_obj = std::numeric_limits<double>::infinity();
  double nuclear = 0.0;
  for (int it = 0; it < cfg.max_iter; ++it) {
    fit_fixed_effects(y - l);
    Eigen::MatrixXd detrended = y - gamma.replicate(1, n) - delta.transpose().replicate(m, 1);
    const Eigen::MatrixXd filled =
        t.mask().select(detrended.array(), l.array()).matrix();
    Eigen::MatrixXd next = detail::svt(filled, cfg.lambda * omega / 2.0, &nuclear);
    const double change = (next - l).norm() / std::max(1.0, l.norm());
    l = std::move(next);
    const double obj = objective(nuclear);
    assert(obj <= prev_obj + 1e-9 * (1.0 + std::abs(prev_obj)) &&
           "block-coordinate objective must not increase");
    diag.objective_history.push_back(obj);
    diag.objective = obj;
    diag.iterations = it + 1;
    prev_obj = obj;
    if (change <= cfg.tol) {
      diag.converged = true;
      break;
    }
  }

  ImputationResult r = detail::passthrough_result(t);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (!t.observed(i, j)) r.predictions[0](i, j) = l(i, j) + gamma[i] + delta[j];
  r.solver = std::move(diag);
  r.low_rank_fit = std::move(l);
  return r;
}

// Rank-r truncation of a fully observed matrix. Not a completion method:
// it reads the missing ground truth, and is used only to bound the
// achievable score of legitimate estimators.
inline ImputationResult truncated_svd_oracle(const PartialTensor& t, const Eigen::MatrixXd& full,
                                             int rank) {
  if (t.depth() != 1) throw std::invalid_argument("truncated_svd_oracle: matrix case only");
  if (full.rows() != t.rows() || full.cols() != t.cols())
    throw std::invalid_argument("truncated_svd_oracle: full matrix shape mismatch");
  if (rank < 1 || rank > std::min(full.rows(), full.cols()))
    throw std::invalid_argument("truncated_svd_oracle: rank out of range");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(full, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd approx = svd.matrixU().leftCols(rank) *
                                 svd.singularValues().head(rank).asDiagonal() *
                                 svd.matrixV().leftCols(rank).transpose();
  ImputationResult r = detail::passthrough_result(t);
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (!t.observed(i, j)) r.predictions[0](i, j) = approx(i, j);
  return r;
}

// Method dispatcher. `full` is consulted only by the truncated SVD oracle.
inline ImputationResult impute(const PartialTensor& t, const EstimatorConfig& cfg,
                               const std::optional<Eigen::MatrixXd>& full = std::nullopt) {
  switch (cfg.method) {
    case Method::mean_over_contexts: return impute_mean_over_contexts(t);
    case Method::mean_over_actions: return impute_mean_over_actions(t);
    case Method::fixed_effects: return impute_fixed_effects(t);
    case Method::collaborative_filtering: return impute_collaborative_filtering(t, cfg);
    case Method::synthetic_interventions: return impute_synthetic_interventions(t, cfg);
    case Method::si_centered: return impute_si_centered(t, cfg);
    case Method::nnm: return impute_nnm(t, cfg);
    case Method::nnm_fe: return impute_nnm_fe(t, cfg);
    case Method::truncated_svd_oracle:
      if (!full) throw std::invalid_argument("truncated_svd_oracle requires the full matrix");
      return truncated_svd_oracle(t, *full, cfg.rank);
  }
  throw std::invalid_argument("impute: unknown method");
}

}  // namespace causalmc
