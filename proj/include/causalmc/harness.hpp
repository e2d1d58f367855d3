#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "causalmc/estimators.hpp"
#include "causalmc/io.hpp"
#include "causalmc/partial_tensor.hpp"
#include "causalmc/patterns.hpp"
#include "causalmc/random.hpp"
#include "causalmc/scm.hpp"

namespace causalmc {

/*
 * harness.hpp
 * -----------
 * End-to-end experiment driver: ingest a matrix (or expand/sample an SCM
 * design), optionally drop rows dominated by negative outcomes, then for a
 * number of seeded shuffles crop the matrix, hide entries according to a
 * pattern, run every configured estimator and score it with R^2 against the
 * hidden truth. Whole experiments are reproducible from the single seed.
 */

enum class BaselineKind { missing_mean, observed_mean };

// R^2 = 1 - MSE(pred) / MSE(constant baseline), scored on hidden cells.
// With the missing-mean baseline the denominator is the variance of the
// hidden true values.
struct RSquared {
  double r2 = 0.0;
  double mse = 0.0;
  double baseline_mse = 0.0;
  bool defined = false;
};

inline RSquared r_squared(const std::vector<Eigen::MatrixXd>& pred, const PartialTensor& truth,
                          const Mask& score_mask, BaselineKind baseline = BaselineKind::missing_mean) {
  if (score_mask.rows() != truth.rows() || score_mask.cols() != truth.cols())
    throw std::invalid_argument("r_squared: mask shape mismatch");
  if (static_cast<Eigen::Index>(pred.size()) != truth.depth())
    throw std::invalid_argument("r_squared: prediction depth mismatch");
  std::vector<double> t_vals, p_vals;
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < truth.cols(); ++j)
      if (score_mask(i, j))
        for (Eigen::Index k = 0; k < truth.depth(); ++k) {
          t_vals.push_back(truth.slice(k)(i, j));
          p_vals.push_back(pred[static_cast<size_t>(k)](i, j));
        }
  if (t_vals.size() < 2) throw std::invalid_argument("r_squared: need at least 2 scored entries");

  double base = 0.0;
  if (baseline == BaselineKind::missing_mean) {
    for (double v : t_vals) base += v;
    base /= static_cast<double>(t_vals.size());
  } else {
    double acc = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < truth.rows(); ++i)
      for (Eigen::Index j = 0; j < truth.cols(); ++j)
        if (truth.observed(i, j) && !score_mask(i, j))
          for (Eigen::Index k = 0; k < truth.depth(); ++k) {
            acc += truth.slice(k)(i, j);
            ++count;
          }
    base = count > 0 ? acc / static_cast<double>(count) : 0.0;
  }

  RSquared out;
  for (size_t a = 0; a < t_vals.size(); ++a) {
    const double e = p_vals[a] - t_vals[a];
    const double b = base - t_vals[a];
    out.mse += e * e;
    out.baseline_mse += b * b;
  }
  out.mse /= static_cast<double>(t_vals.size());
  out.baseline_mse /= static_cast<double>(t_vals.size());
  if (out.baseline_mse > 0.0) {
    out.r2 = 1.0 - out.mse / out.baseline_mse;
    out.defined = true;
  }
  return out;
}

// Removes rows whose observed entries are negative more often than the
// threshold fraction (death rule: outcome < 0).
struct KillerFilterResult {
  PartialTensor tensor;
  std::vector<std::string> removed_labels;
  std::vector<int> removed_rows;
};

inline KillerFilterResult filter_killer_drugs(const PartialTensor& t, double threshold) {
  if (t.depth() != 1) throw std::invalid_argument("filter_killer_drugs: matrix case only");
  if (!(threshold > 0.0) || threshold > 1.0)
    throw std::invalid_argument("filter_killer_drugs: threshold must be in (0,1]");
  std::vector<int> keep, removed;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    int observed = 0, negative = 0;
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t.observed(i, j)) {
        ++observed;
        if (t.slice(0)(i, j) < 0.0) ++negative;
      }
    const double frac = observed > 0 ? static_cast<double>(negative) / observed : 0.0;
    if (frac > threshold)
      removed.push_back(static_cast<int>(i));
    else
      keep.push_back(static_cast<int>(i));
  }
  if (keep.empty()) throw std::runtime_error("filter_killer_drugs: all rows removed");

  Eigen::MatrixXd values(static_cast<Eigen::Index>(keep.size()), t.cols());
  Mask mask(static_cast<Eigen::Index>(keep.size()), t.cols());
  std::vector<std::string> row_labels;
  for (size_t a = 0; a < keep.size(); ++a) {
    values.row(static_cast<Eigen::Index>(a)) = t.slice(0).row(keep[a]);
    mask.row(static_cast<Eigen::Index>(a)) = t.mask().row(keep[a]);
    if (!t.row_labels().empty()) row_labels.push_back(t.row_labels()[static_cast<size_t>(keep[a])]);
  }
  KillerFilterResult out{PartialTensor::matrix(std::move(values), std::move(mask),
                                               std::move(row_labels), t.col_labels()),
                         {}, removed};
  for (int i : removed) out.removed_labels.push_back(t.row_label(i));
  return out;
}

// Spectrum diagnostics of a fully observed matrix: cumulative explained
// variance per rank, optional truncated-SVD R^2 upper bounds under a
// pattern, and how row-constant the rank-1 truncation is.
struct SvdReport {
  Eigen::VectorXd singular_values;
  std::vector<std::pair<int, double>> explained_variance;  // (rank, cumulative share)
  std::vector<std::pair<int, double>> r2_bounds;           // (rank, R^2 on hidden cells)
  double rank1_row_constancy = 0.0;
};

inline SvdReport svd_report(const Eigen::MatrixXd& full, const std::vector<int>& ranks,
                            const std::optional<Mask>& pattern = std::nullopt) {
  SvdReport out;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(full, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  const double total = out.singular_values.squaredNorm();
  for (int r : ranks) {
    if (r < 1 || r > out.singular_values.size())
      throw std::invalid_argument("svd_report: rank out of range");
    out.explained_variance.emplace_back(
        r, total > 0 ? out.singular_values.head(r).squaredNorm() / total : 0.0);
  }

  if (pattern) {
    if (pattern->rows() != full.rows() || pattern->cols() != full.cols())
      throw std::invalid_argument("svd_report: pattern shape mismatch");
    const PartialTensor truth = PartialTensor::matrix(
        full, Mask::Constant(full.rows(), full.cols(), true));
    const Mask hidden = !(*pattern);
    for (int r : ranks) {
      const Eigen::MatrixXd approx = svd.matrixU().leftCols(r) *
                                     svd.singularValues().head(r).asDiagonal() *
                                     svd.matrixV().leftCols(r).transpose();
      const RSquared score = r_squared({approx}, truth, hidden);
      out.r2_bounds.emplace_back(r, score.defined ? score.r2 : 0.0);
    }
  }

  // Fraction of the rank-1 truncation's variation living between rows
  // rather than within them (1 = perfectly constant rows).
  const Eigen::MatrixXd s1 = svd.matrixU().col(0) * svd.singularValues()[0] *
                             svd.matrixV().col(0).transpose();
  const double grand = s1.mean();
  double total_ss = (s1.array() - grand).square().sum();
  double within = 0.0;
  for (Eigen::Index i = 0; i < s1.rows(); ++i) {
    const double rm = s1.row(i).mean();
    within += (s1.row(i).array() - rm).square().sum();
  }
  out.rank1_row_constancy = total_ss > 0 ? 1.0 - within / total_ss : 1.0;
  return out;
}

inline Eigen::MatrixXd zscore_for_display(const PartialTensor& t) {
  if (t.depth() != 1) throw std::invalid_argument("zscore_for_display: matrix case only");
  double mean = 0.0, count = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t.observed(i, j)) { mean += t.slice(0)(i, j); count += 1.0; }
  mean = count > 0 ? mean / count : 0.0;
  double var = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      if (t.observed(i, j)) { const double d = t.slice(0)(i, j) - mean; var += d * d; }
  const double sd = count > 1 ? std::sqrt(var / (count - 1.0)) : 1.0;
  return (t.slice(0).array() - mean).matrix() / (sd > 0 ? sd : 1.0);
}

struct InputSpec {
  enum class Kind { csv, manifest, design } kind = Kind::csv;
  std::string path;
  int ns = 0;  // design inputs: 0 = exact expectations, >= 1 = sampled cells
};

struct EstimatorSpec {
  std::string name;
  EstimatorConfig config;
  std::vector<double> lambda_grid;  // NNM family: swept warm-started, best kept
};

struct ExperimentConfig {
  InputSpec input;
  std::optional<std::pair<Eigen::Index, Eigen::Index>> crop;
  PatternSpec pattern;  // m, n are taken from the (cropped) tensor
  std::vector<EstimatorSpec> estimators;
  int shuffles = 20;
  std::uint64_t seed = 0;
  std::optional<double> killer_threshold;
  BaselineKind baseline = BaselineKind::missing_mean;
  std::vector<int> svd_ranks;
  bool poison_check = false;  // rerun every estimator on sentinel-poisoned hidden cells
};

struct ShuffleOutcome {
  int shuffle = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double r2 = 0.0;
  double mse = 0.0;
  double baseline_mse = 0.0;
  int failed_entries = 0;
  double lambda = 0.0;  // NNM family: the grid value that won
  std::string error;
};

struct EstimatorSummary {
  std::string name;
  std::vector<ShuffleOutcome> runs;
  double median_r2 = 0.0;
  double q1_r2 = 0.0;
  double q3_r2 = 0.0;
};

struct EvaluationReport {
  std::vector<EstimatorSummary> estimators;
  std::optional<SvdReport> svd;
  Eigen::Index rows = 0, cols = 0;
};

namespace detail {

inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double pos = q * (static_cast<double>(xs.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = static_cast<size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

// Score one estimator on one masked instance. `hidden` marks the cells with
// known truth that the estimator must reconstruct.
inline ShuffleOutcome score_estimator(const EstimatorSpec& spec, const PartialTensor& masked,
                                      const PartialTensor& truth, const Mask& hidden,
                                      BaselineKind baseline, bool poison_check) {
  ShuffleOutcome run;
  auto evaluate = [&](const PartialTensor& input) {
    if ((spec.config.method == Method::nnm || spec.config.method == Method::nnm_fe) &&
        !spec.lambda_grid.empty()) {
      // Warm-started sweep from the largest lambda down; report the best.
      std::vector<double> grid = spec.lambda_grid;
      std::sort(grid.rbegin(), grid.rend());
      std::optional<Eigen::MatrixXd> warm;
      std::optional<ImputationResult> best;
      double best_r2 = -std::numeric_limits<double>::infinity();
      double best_lambda = grid.front();
      for (double lam : grid) {
        EstimatorConfig cfg = spec.config;
        cfg.lambda = lam;
        ImputationResult res = cfg.method == Method::nnm ? impute_nnm(input, cfg, warm)
                                                         : impute_nnm_fe(input, cfg);
        warm = res.low_rank_fit;
        const RSquared score = r_squared(res.predictions, truth, hidden, baseline);
        if (score.defined && score.r2 > best_r2) {
          best_r2 = score.r2;
          best_lambda = lam;
          best = std::move(res);
        }
      }
      if (!best) throw std::runtime_error("lambda sweep produced no scored result");
      run.lambda = best_lambda;
      return *best;
    }
    run.lambda = spec.config.lambda;
    std::optional<Eigen::MatrixXd> full;
    if (spec.config.method == Method::truncated_svd_oracle) full = truth.slice(0);
    return impute(input, spec.config, full);
  };

  try {
    ImputationResult res = evaluate(masked);
    if (poison_check) {
      std::vector<Eigen::MatrixXd> poisoned;
      for (Eigen::Index k = 0; k < masked.depth(); ++k) {
        Eigen::MatrixXd s = masked.slice(k);
        for (Eigen::Index i = 0; i < masked.rows(); ++i)
          for (Eigen::Index j = 0; j < masked.cols(); ++j)
            if (!masked.observed(i, j)) s(i, j) = 1e120;
        poisoned.push_back(std::move(s));
      }
      const PartialTensor poisoned_t(std::move(poisoned), masked.mask(), masked.row_labels(),
                                     masked.col_labels());
      if (spec.config.method != Method::truncated_svd_oracle) {
        const ImputationResult res2 = evaluate(poisoned_t);
        for (size_t k = 0; k < res.predictions.size(); ++k)
          for (Eigen::Index i = 0; i < masked.rows(); ++i)
            for (Eigen::Index j = 0; j < masked.cols(); ++j)
              if (hidden(i, j) && res.imputed_mask(i, j) &&
                  res.predictions[k](i, j) != res2.predictions[k](i, j))
                throw std::runtime_error("hidden-entry hygiene violated at (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
    Mask scored = hidden && res.imputed_mask;
    run.failed_entries = static_cast<int>((hidden && !res.imputed_mask).count());
    const RSquared score = r_squared(res.predictions, truth, scored, baseline);
    run.ok = score.defined;
    run.r2 = score.r2;
    run.mse = score.mse;
    run.baseline_mse = score.baseline_mse;
    if (!score.defined) run.error = "undefined R^2 (zero-variance truth)";
  } catch (const std::exception& e) {
    run.ok = false;
    run.error = e.what();
  }
  return run;
}

}  // namespace detail

// Runs the configured experiment on an already loaded tensor.
inline EvaluationReport run_experiment(const PartialTensor& input, const ExperimentConfig& cfg) {
  if (cfg.shuffles < 1) throw std::invalid_argument("run_experiment: shuffles must be >= 1");
  PartialTensor base = input;
  if (cfg.killer_threshold) base = filter_killer_drugs(base, *cfg.killer_threshold).tensor;

  const Eigen::Index crop_rows = cfg.crop ? cfg.crop->first : base.rows();
  const Eigen::Index crop_cols = cfg.crop ? cfg.crop->second : base.cols();

  EvaluationReport report;
  report.rows = crop_rows;
  report.cols = crop_cols;
  for (const auto& spec : cfg.estimators) report.estimators.push_back({spec.name, {}, 0, 0, 0});

  for (int s = 0; s < cfg.shuffles; ++s) {
    const std::uint64_t shuffle_seed = rng::mix(cfg.seed, 0x73687566ULL, static_cast<std::uint64_t>(s));
    const PartialTensor truth = shuffle_and_crop(base, crop_rows, crop_cols, shuffle_seed);

    PatternSpec pattern = cfg.pattern;
    pattern.m = truth.rows();
    pattern.n = truth.cols();
    pattern.seed = rng::mix(cfg.seed, 0x70617474ULL, static_cast<std::uint64_t>(s));
    const Mask keep = generate_pattern(pattern);

    const Mask visible = truth.mask() && keep;
    const Mask hidden = truth.mask() && !keep;
    if (hidden.count() < 2)
      throw std::runtime_error("run_experiment: pattern hides fewer than 2 known entries");

    const PartialTensor masked(std::vector<Eigen::MatrixXd>(truth.slices()), visible,
                               truth.row_labels(), truth.col_labels());

    for (size_t e = 0; e < cfg.estimators.size(); ++e) {
      ShuffleOutcome run = detail::score_estimator(cfg.estimators[e], masked, truth, hidden,
                                                   cfg.baseline, cfg.poison_check);
      run.shuffle = s;
      run.seed = shuffle_seed;
      report.estimators[e].runs.push_back(std::move(run));
    }
  }

  for (auto& est : report.estimators) {
    std::vector<double> r2s;
    for (const auto& run : est.runs)
      if (run.ok) r2s.push_back(run.r2);
    est.median_r2 = detail::quantile(r2s, 0.5);
    est.q1_r2 = detail::quantile(r2s, 0.25);
    est.q3_r2 = detail::quantile(r2s, 0.75);
  }

  if (!cfg.svd_ranks.empty()) {
    // Spectrum of the first cropped instance, fully observed inputs only.
    const PartialTensor probe =
        shuffle_and_crop(base, crop_rows, crop_cols, rng::mix(cfg.seed, 0x73687566ULL, 0));
    if (probe.depth() == 1 && probe.mask().all()) {
      PatternSpec pattern = cfg.pattern;
      pattern.m = probe.rows();
      pattern.n = probe.cols();
      pattern.seed = rng::mix(cfg.seed, 0x70617474ULL, 0);
      report.svd = svd_report(probe.slice(0), cfg.svd_ranks, generate_pattern(pattern));
    }
  }
  return report;
}

// Loads the configured input (CSV, tensor manifest, or SCM design file).
inline PartialTensor load_experiment_input(const InputSpec& input, std::uint64_t seed) {
  switch (input.kind) {
    case InputSpec::Kind::csv: return io::read_matrix_csv(input.path);
    case InputSpec::Kind::manifest: return io::read_tensor_manifest(input.path);
    case InputSpec::Kind::design: {
      const io::DesignFile df = io::read_design(input.path);
      if (input.ns >= 1) return sample_design(df.design, input.ns, rng::mix(seed, 0x64736E73ULL)).means;
      return expand_design(df.design);
    }
  }
  throw std::invalid_argument("load_experiment_input: unknown input kind");
}

inline EvaluationReport run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(load_experiment_input(cfg.input, cfg.seed), cfg);
}

// ---------------------------------------------------------------------------
// Config parsing and report output
// ---------------------------------------------------------------------------

inline Method method_from_name(const std::string& name) {
  if (name == "mean_over_contexts") return Method::mean_over_contexts;
  if (name == "mean_over_actions") return Method::mean_over_actions;
  if (name == "fixed_effects") return Method::fixed_effects;
  if (name == "collaborative_filtering" || name == "cf") return Method::collaborative_filtering;
  if (name == "synthetic_interventions" || name == "si") return Method::synthetic_interventions;
  if (name == "si_mean_contexts" || name == "si_fe" || name == "si_centered")
    return Method::si_centered;
  if (name == "nnm") return Method::nnm;
  if (name == "nnm_fe") return Method::nnm_fe;
  if (name == "truncated_svd_oracle" || name == "svd_oracle") return Method::truncated_svd_oracle;
  throw std::invalid_argument("unknown estimator method '" + name + "'");
}

inline Direction direction_from_name(const std::string& name) {
  if (name == "rows" || name == "within_rows") return Direction::within_rows;
  if (name == "cols" || name == "columns" || name == "within_columns")
    return Direction::within_columns;
  throw std::invalid_argument("unknown direction '" + name + "'");
}

inline Centering centering_from_name(const std::string& name) {
  if (name == "none") return Centering::none;
  if (name == "mean_over_contexts") return Centering::mean_over_contexts;
  if (name == "fixed_effects") return Centering::fixed_effects;
  throw std::invalid_argument("unknown centering '" + name + "'");
}

inline PatternKind pattern_kind_from_name(const std::string& name) {
  if (name == "square_block") return PatternKind::square_block;
  if (name == "staircase") return PatternKind::staircase;
  if (name == "uniform_random") return PatternKind::uniform_random;
  throw std::invalid_argument("unknown pattern kind '" + name + "'");
}

inline EstimatorSpec estimator_spec_from_json(const nlohmann::json& j) {
  EstimatorSpec spec;
  const std::string name = j.at("method").get<std::string>();
  spec.name = name;
  spec.config.method = method_from_name(name);
  if (name == "si_mean_contexts") spec.config.centering = Centering::mean_over_contexts;
  if (name == "si_fe") spec.config.centering = Centering::fixed_effects;
  if (j.contains("direction"))
    spec.config.direction = direction_from_name(j["direction"].get<std::string>());
  if (j.contains("centering"))
    spec.config.centering = centering_from_name(j["centering"].get<std::string>());
  if (j.contains("k")) spec.config.k_neighbors = j["k"].get<int>();
  if (j.contains("lambda")) spec.config.lambda = j["lambda"].get<double>();
  if (j.contains("lambda_grid")) spec.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
  if (j.contains("rank")) spec.config.rank = j["rank"].get<int>();
  if (j.contains("tol")) spec.config.tol = j["tol"].get<double>();
  if (j.contains("max_iter")) spec.config.max_iter = j["max_iter"].get<int>();
  if (j.contains("pinv_rcond")) spec.config.pinv_rcond = j["pinv_rcond"].get<double>();
  // Default sweep for the nuclear norm family when nothing was pinned.
  if ((spec.config.method == Method::nnm || spec.config.method == Method::nnm_fe) &&
      spec.lambda_grid.empty() && !j.contains("lambda"))
    spec.lambda_grid = {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  spec.config.validate();
  return spec;
}

inline ExperimentConfig read_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  ExperimentConfig cfg;
  const auto& input = j.at("input");
  if (input.contains("csv")) {
    cfg.input.kind = InputSpec::Kind::csv;
    cfg.input.path = io::detail::sibling_path(path, input["csv"].get<std::string>());
  } else if (input.contains("manifest")) {
    cfg.input.kind = InputSpec::Kind::manifest;
    cfg.input.path = io::detail::sibling_path(path, input["manifest"].get<std::string>());
  } else if (input.contains("design")) {
    cfg.input.kind = InputSpec::Kind::design;
    cfg.input.path = io::detail::sibling_path(path, input["design"].get<std::string>());
    cfg.input.ns = input.value("ns", 0);
  } else {
    throw std::runtime_error(path + ": input must name a csv, manifest, or design");
  }
  if (j.contains("crop"))
    cfg.crop = std::make_pair(j["crop"].at("rows").get<Eigen::Index>(),
                              j["crop"].at("cols").get<Eigen::Index>());
  const auto& pat = j.at("pattern");
  cfg.pattern.kind = pattern_kind_from_name(pat.at("kind").get<std::string>());
  cfg.pattern.n_obs = pat.value("n_obs", 0);
  cfg.pattern.block_fraction = pat.value("block_fraction", 0.5);
  cfg.pattern.density = pat.value("density", 0.5);
  for (const auto& e : j.at("estimators")) cfg.estimators.push_back(estimator_spec_from_json(e));
  cfg.shuffles = j.value("shuffles", 20);
  cfg.seed = j.value("seed", 0ULL);
  if (j.contains("killer_threshold")) cfg.killer_threshold = j["killer_threshold"].get<double>();
  if (j.value("baseline", std::string("missing_mean")) == "observed_mean")
    cfg.baseline = BaselineKind::observed_mean;
  if (j.contains("svd_ranks")) cfg.svd_ranks = j["svd_ranks"].get<std::vector<int>>();
  cfg.poison_check = j.value("poison_check", false);
  return cfg;
}

// One row per shuffle x estimator, followed by per-estimator summary rows.
inline void write_report_csv(const std::string& path, const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "record,estimator,shuffle,seed,r2,mse,baseline_mse,failed_entries,lambda,error\n";
  for (const auto& est : report.estimators)
    for (const auto& run : est.runs) {
      out << "run," << est.name << "," << run.shuffle << "," << run.seed << ",";
      if (run.ok) out << io::format_double(run.r2);
      out << "," << io::format_double(run.mse) << "," << io::format_double(run.baseline_mse)
          << "," << run.failed_entries << "," << io::format_double(run.lambda) << ","
          << run.error << "\n";
    }
  for (const auto& est : report.estimators)
    out << "summary," << est.name << ",,," << io::format_double(est.median_r2) << ",,,,,"
        << "q1=" << io::format_double(est.q1_r2) << " q3=" << io::format_double(est.q3_r2)
        << "\n";
  if (report.svd) {
    for (const auto& [r, ev] : report.svd->explained_variance)
      out << "svd_explained_variance,rank_" << r << ",,," << io::format_double(ev) << ",,,,,\n";
    for (const auto& [r, r2] : report.svd->r2_bounds)
      out << "svd_r2_bound,rank_" << r << ",,," << io::format_double(r2) << ",,,,,\n";
    out << "svd_rank1_row_constancy,,,," << io::format_double(report.svd->rank1_row_constancy)
        << ",,,,,\n";
  }
}

}  // namespace causalmc
