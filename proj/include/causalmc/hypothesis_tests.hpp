#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "causalmc/distributions.hpp"
#include "causalmc/random.hpp"
#include "causalmc/scm.hpp"

namespace causalmc {

/*
 * hypothesis_tests.hpp
 * --------------------
 * Model-adequacy tests for matrices whose cells carry ns repeated samples:
 *  - F tests for homoscedasticity along rows or columns,
 *  - a Welch-style test of the two-way fixed-effect (additive means) model
 *    on 2x2 windows,
 *  - one-way fixed-effect tests on consecutive cell pairs,
 *  - Bonferroni / Sidak familywise corrections,
 *  - an ROC experiment separating additive-mean designs from general
 *    factor-model designs by the minimum corrected p-value.
 */

enum class TestAxis { within_rows, within_columns };
enum class CorrectionMethod { bonferroni, sidak };

struct CellTest {
  int i = 0, j = 0;    // anchor cell of the pair / window
  int i2 = -1, j2 = -1;  // partner cell for pair-based tests
  double statistic = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
  bool valid = true;
  std::string note;
};

struct TestReport {
  std::vector<CellTest> tests;
  double alpha = 0.0;
  double corrected_alpha = 0.0;
  std::vector<bool> rejections;  // aligned with tests
  int family_size = 0;           // valid tests

  int rejection_count() const {
    int c = 0;
    for (bool b : rejections) c += b ? 1 : 0;
    return c;
  }
};

namespace detail {
inline void check_stats(const SampleStats& s, const char* where) {
  if (s.ns < 2) throw std::invalid_argument(std::string(where) + ": ns must be >= 2");
  if (s.means.rows() != s.vars.rows() || s.means.cols() != s.vars.cols() ||
      s.means.rows() != s.mask.rows() || s.means.cols() != s.mask.cols())
    throw std::invalid_argument(std::string(where) + ": shape mismatch");
  if ((s.vars.array() < 0.0).any())
    throw std::invalid_argument(std::string(where) + ": negative variance");
}
}  // namespace detail

// Variance-ratio test on consecutive observed cells along the chosen axis.
// Under equal variances (and ns samples per cell) the ratio follows
// F(ns-1, ns-1); p-values are two-sided.
inline TestReport f_test_homoscedasticity(const SampleStats& stats, TestAxis axis) {
  detail::check_stats(stats, "f_test_homoscedasticity");
  TestReport report;
  const double d = stats.ns - 1.0;
  const Eigen::Index lines = axis == TestAxis::within_rows ? stats.means.rows() : stats.means.cols();
  const Eigen::Index len = axis == TestAxis::within_rows ? stats.means.cols() : stats.means.rows();
  for (Eigen::Index line = 0; line < lines; ++line) {
    int prev = -1;
    for (Eigen::Index a = 0; a < len; ++a) {
      const Eigen::Index i = axis == TestAxis::within_rows ? line : a;
      const Eigen::Index j = axis == TestAxis::within_rows ? a : line;
      if (!stats.mask(i, j)) continue;
      if (prev >= 0) {
        const Eigen::Index pi = axis == TestAxis::within_rows ? line : prev;
        const Eigen::Index pj = axis == TestAxis::within_rows ? prev : line;
        CellTest t;
        t.i = static_cast<int>(i);
        t.j = static_cast<int>(j);
        t.i2 = static_cast<int>(pi);
        t.j2 = static_cast<int>(pj);
        t.dof = d;
        const double s2_prev = stats.vars(pi, pj);
        const double s2_cur = stats.vars(i, j);
        if (s2_prev <= 0.0) {
          t.valid = false;
          t.note = "zero variance in denominator";
        } else {
          t.statistic = s2_cur / s2_prev;
          t.p_value = dist::f_two_sided_p(t.statistic, d, d);
        }
        report.tests.push_back(std::move(t));
      }
      prev = static_cast<int>(a);
    }
  }
  for (const auto& t : report.tests) report.family_size += t.valid ? 1 : 0;
  return report;
}

// Welch-style test of additive means on every fully observed 2x2 window
// {i-1,i} x {j-1,j}. The statistic divides the window's interaction
// contrast by the pooled standard error; its null distribution is
// approximated by a t distribution with Satterthwaite degrees of freedom
// computed from the column-wise variance groups.
inline TestReport welch_fe_test(const SampleStats& stats) {
  detail::check_stats(stats, "welch_fe_test");
  TestReport report;
  const double ns = stats.ns;
  for (Eigen::Index i = 1; i < stats.means.rows(); ++i)
    for (Eigen::Index j = 1; j < stats.means.cols(); ++j) {
      if (!(stats.mask(i, j) && stats.mask(i - 1, j) && stats.mask(i, j - 1) &&
            stats.mask(i - 1, j - 1)))
        continue;
      CellTest t;
      t.i = static_cast<int>(i);
      t.j = static_cast<int>(j);
      const double contrast = stats.means(i - 1, j - 1) + stats.means(i, j) -
                              stats.means(i, j - 1) - stats.means(i - 1, j);
      const double var_sum = stats.vars(i - 1, j - 1) + stats.vars(i, j) +
                             stats.vars(i, j - 1) + stats.vars(i - 1, j);
      const double g_cur = stats.vars(i, j) + stats.vars(i - 1, j);
      const double g_prev = stats.vars(i, j - 1) + stats.vars(i - 1, j - 1);
      if (var_sum <= 0.0 || (g_cur * g_cur + g_prev * g_prev) <= 0.0) {
        t.valid = false;
        t.note = "zero variance in window";
      } else {
        t.statistic = contrast / std::sqrt(var_sum / ns);
        t.dof = (ns - 1.0) * (g_cur + g_prev) * (g_cur + g_prev) /
                (g_cur * g_cur + g_prev * g_prev);
        t.p_value = dist::t_two_sided_p(t.statistic, t.dof);
      }
      report.tests.push_back(std::move(t));
    }
  for (const auto& t : report.tests) report.family_size += t.valid ? 1 : 0;
  return report;
}

// Two-sample Welch t test on consecutive observed cells along the axis;
// tests a one-way fixed effect (equal means along the axis).
inline TestReport one_way_fe_test(const SampleStats& stats, TestAxis axis) {
  detail::check_stats(stats, "one_way_fe_test");
  TestReport report;
  const double ns = stats.ns;
  const Eigen::Index lines = axis == TestAxis::within_rows ? stats.means.rows() : stats.means.cols();
  const Eigen::Index len = axis == TestAxis::within_rows ? stats.means.cols() : stats.means.rows();
  for (Eigen::Index line = 0; line < lines; ++line) {
    int prev = -1;
    for (Eigen::Index a = 0; a < len; ++a) {
      const Eigen::Index i = axis == TestAxis::within_rows ? line : a;
      const Eigen::Index j = axis == TestAxis::within_rows ? a : line;
      if (!stats.mask(i, j)) continue;
      if (prev >= 0) {
        const Eigen::Index pi = axis == TestAxis::within_rows ? line : prev;
        const Eigen::Index pj = axis == TestAxis::within_rows ? prev : line;
        CellTest t;
        t.i = static_cast<int>(i);
        t.j = static_cast<int>(j);
        t.i2 = static_cast<int>(pi);
        t.j2 = static_cast<int>(pj);
        const double s2a = stats.vars(i, j);
        const double s2b = stats.vars(pi, pj);
        if (s2a + s2b <= 0.0) {
          t.valid = false;
          t.note = "zero variance in both cells";
        } else {
          t.statistic = (stats.means(i, j) - stats.means(pi, pj)) / std::sqrt((s2a + s2b) / ns);
          t.dof = (ns - 1.0) * (s2a + s2b) * (s2a + s2b) / (s2a * s2a + s2b * s2b);
          t.p_value = dist::t_two_sided_p(t.statistic, t.dof);
        }
        report.tests.push_back(std::move(t));
      }
      prev = static_cast<int>(a);
    }
  }
  for (const auto& t : report.tests) report.family_size += t.valid ? 1 : 0;
  return report;
}

struct Correction {
  double corrected_alpha = 0.0;
  std::vector<bool> rejections;
};

// Familywise error control over N hypotheses: Bonferroni alpha/N or Sidak
// 1-(1-alpha)^(1/N).
inline Correction correct_multiple(const std::vector<double>& p_values, double alpha,
                                   CorrectionMethod method) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("correct_multiple: alpha must be in (0,1)");
  const std::size_t n = p_values.size();
  if (n < 1) throw std::invalid_argument("correct_multiple: empty family");
  Correction c;
  c.corrected_alpha = method == CorrectionMethod::bonferroni
                          ? alpha / static_cast<double>(n)
                          : 1.0 - std::pow(1.0 - alpha, 1.0 / static_cast<double>(n));
  c.rejections.reserve(n);
  for (double p : p_values) c.rejections.push_back(p < c.corrected_alpha);
  return c;
}

inline void apply_correction(TestReport& report, double alpha, CorrectionMethod method) {
  report.alpha = alpha;
  report.rejections.assign(report.tests.size(), false);
  if (report.family_size < 1) {
    report.corrected_alpha = 0.0;
    return;
  }
  std::vector<double> ps;
  ps.reserve(static_cast<size_t>(report.family_size));
  for (const auto& t : report.tests)
    if (t.valid) ps.push_back(t.p_value);
  const Correction c = correct_multiple(ps, alpha, method);
  report.corrected_alpha = c.corrected_alpha;
  size_t k = 0;
  for (size_t a = 0; a < report.tests.size(); ++a)
    if (report.tests[a].valid) report.rejections[a] = c.rejections[k++];
}

// Minimum Bonferroni-corrected p-value of the additive-means test; the
// matrix-level score used by the ROC experiment (low = strong evidence
// against additivity).
inline double min_corrected_p(const TestReport& report) {
  double best = 1.0;
  for (const auto& t : report.tests)
    if (t.valid) best = std::min(best, t.p_value);
  if (report.family_size < 1) return 1.0;
  return std::min(1.0, best * report.family_size);
}

struct RocConfig {
  int matrix_size = 20;        // square matrices
  int ns = 100;                // samples per cell
  int replicates = 200;        // per class
  std::uint64_t seed = 0;
  int nodes = 5;               // SCM size
  double edge_prob = 0.5;
  double intervene_prob = 0.2; // per-node do-intervention probability
  double value_range = 10.0;   // conditioning / intervention values in [0, range]
};

struct RocResult {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  double auc = 0.0;
  std::vector<double> scores_additive;  // class with shared intervention targets
  std::vector<double> scores_factor;    // class with per-row targets
};

namespace detail {

// Random strictly-lower-triangular DAG weights: each edge present with
// probability edge_prob, weights uniform on [-1,-0.25] u [0.25,1], unit
// noise variances.
inline LinearGaussianSCM random_dag_scm(int q, double edge_prob, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.25, 1.0);
  LinearGaussianSCM scm;
  scm.weights = Eigen::MatrixXd::Zero(q, q);
  for (int k = 1; k < q; ++k)
    for (int l = 0; l < k; ++l)
      if (unit(gen) < edge_prob)
        scm.weights(k, l) = (unit(gen) < 0.5 ? -1.0 : 1.0) * mag(gen);
  scm.noise_mean = Eigen::VectorXd::Zero(q);
  scm.noise_var = Eigen::VectorXd::Ones(q);
  return scm;
}

inline std::vector<int> random_targets(int q, double prob, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> targets;
  for (int k = 0; k < q; ++k)
    if (unit(gen) < prob) targets.push_back(k);
  return targets;
}

// One simulated matrix: additive class shares intervention targets across
// all rows, factor class redraws targets per row. The observed node is the
// last one; contexts condition the middle node on per-column values.
inline double roc_replicate_score(const RocConfig& cfg, std::uint64_t seed, bool shared_targets) {
  auto gen = std::mt19937_64(seed);
  std::uniform_real_distribution<double> value(0.0, cfg.value_range);

  CounterfactualDesign design;
  design.scm = random_dag_scm(cfg.nodes, cfg.edge_prob, gen);
  design.observed = {cfg.nodes - 1};
  const int context_node = cfg.nodes / 2;

  const std::vector<int> shared = random_targets(cfg.nodes, cfg.intervene_prob, gen);
  for (int i = 0; i < cfg.matrix_size; ++i) {
    const std::vector<int> targets =
        shared_targets ? shared : random_targets(cfg.nodes, cfg.intervene_prob, gen);
    Eigen::VectorXd vals(static_cast<Eigen::Index>(targets.size()));
    for (Eigen::Index a = 0; a < vals.size(); ++a) vals[a] = value(gen);
    design.actions.push_back(Intervention::do_values(targets, vals, cfg.nodes));
  }
  for (int j = 0; j < cfg.matrix_size; ++j) {
    Context ctx;
    ctx.cond_nodes = {context_node};
    ctx.cond_values = Eigen::VectorXd::Constant(1, value(gen));
    design.contexts.push_back(ctx);
  }

  const DesignSample sample = sample_design(design, cfg.ns, rng::mix(seed, 0x73616D70ULL));
  TestReport report = welch_fe_test(sample.stats[0]);
  return min_corrected_p(report);
}

}  // namespace detail

// Trapezoidal AUC of scores (low score = positive class).
inline RocResult roc_from_scores(std::vector<double> negatives, std::vector<double> positives) {
  RocResult out;
  out.scores_additive = negatives;
  out.scores_factor = positives;
  std::vector<double> thresholds;
  thresholds.insert(thresholds.end(), negatives.begin(), negatives.end());
  thresholds.insert(thresholds.end(), positives.begin(), positives.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  auto rate_leq = [](const std::vector<double>& xs, double thr) {
    double c = 0;
    for (double x : xs) c += (x <= thr) ? 1.0 : 0.0;
    return xs.empty() ? 0.0 : c / static_cast<double>(xs.size());
  };
  out.points.emplace_back(0.0, 0.0);
  for (double thr : thresholds)
    out.points.emplace_back(rate_leq(negatives, thr), rate_leq(positives, thr));
  out.points.emplace_back(1.0, 1.0);
  std::sort(out.points.begin(), out.points.end());
  double auc = 0.0;
  for (size_t a = 1; a < out.points.size(); ++a)
    auc += (out.points[a].first - out.points[a - 1].first) *
           0.5 * (out.points[a].second + out.points[a - 1].second);
  out.auc = auc;
  return out;
}

// Simulates `replicates` matrices per class and sweeps the matrix-level
// score (minimum corrected p of the additive-means test) into an ROC curve.
inline RocResult roc_experiment(const RocConfig& cfg) {
  if (cfg.replicates < 2) throw std::invalid_argument("roc_experiment: replicates must be >= 2");
  if (cfg.matrix_size < 2) throw std::invalid_argument("roc_experiment: matrix_size must be >= 2");
  std::vector<double> additive(static_cast<size_t>(cfg.replicates));
  std::vector<double> factor(static_cast<size_t>(cfg.replicates));
  for (int r = 0; r < cfg.replicates; ++r) {
    additive[static_cast<size_t>(r)] =
        detail::roc_replicate_score(cfg, rng::mix(cfg.seed, 2 * static_cast<std::uint64_t>(r)), true);
    factor[static_cast<size_t>(r)] =
        detail::roc_replicate_score(cfg, rng::mix(cfg.seed, 2 * static_cast<std::uint64_t>(r) + 1), false);
  }
  return roc_from_scores(std::move(additive), std::move(factor));
}

}  // namespace causalmc
