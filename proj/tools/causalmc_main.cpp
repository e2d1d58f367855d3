// Command line front end: simulate counterfactual designs, generate
// observation masks, impute missing entries, run scored experiments,
// run model-adequacy tests, and report SVD diagnostics.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "causalmc/causalmc.hpp"

namespace {

using namespace causalmc;

std::vector<std::string> sequence_labels(const char* prefix, Eigen::Index count) {
  std::vector<std::string> out;
  for (Eigen::Index k = 1; k <= count; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

PartialTensor with_labels(const PartialTensor& t, std::vector<std::string> rows,
                          std::vector<std::string> cols) {
  return PartialTensor(std::vector<Eigen::MatrixXd>(t.slices()), t.mask(), std::move(rows),
                       std::move(cols));
}

void write_tensor_output(const std::string& path, const PartialTensor& t,
                         const std::vector<std::string>& slice_names) {
  if (t.depth() == 1)
    io::write_matrix_csv(path, t);
  else
    io::write_tensor_manifest(path, t, slice_names);
}

int cmd_simulate(const std::string& design_path, const std::string& prefix, int ns,
                 std::uint64_t seed) {
  const io::DesignFile df = io::read_design(design_path);
  const auto row_labels = sequence_labels("a", df.design.num_actions());
  const auto col_labels = sequence_labels("c", df.design.num_contexts());
  const bool tensor = df.design.num_outcomes() > 1;
  const std::string ext = tensor ? ".json" : ".csv";

  const PartialTensor truth =
      with_labels(expand_design(df.design), row_labels, col_labels);
  write_tensor_output(prefix + "_truth" + ext, truth, df.outcome_names);
  std::cout << "wrote " << prefix + "_truth" + ext << " (" << truth.rows() << "x" << truth.cols()
            << "x" << truth.depth() << ")\n";

  if (ns >= 1) {
    const DesignSample sample = sample_design(df.design, ns, seed);
    const PartialTensor cells = with_labels(sample.means, row_labels, col_labels);
    write_tensor_output(prefix + "_samples" + ext, cells, df.outcome_names);
    std::cout << "wrote " << prefix + "_samples" + ext << " (ns=" << ns << ")\n";
    for (size_t k = 0; k < sample.stats.size(); ++k) {
      const std::string name = prefix + "_samples_stats" +
                               (tensor ? "_" + df.outcome_names[k] : "") + ".json";
      io::write_samples_manifest(name, sample.stats[k], row_labels, col_labels);
      std::cout << "wrote " << name << "\n";
    }
  }
  return 0;
}

int cmd_pattern(const std::string& kind, Eigen::Index m, Eigen::Index n, int n_obs,
                double block_fraction, double density, std::uint64_t seed,
                const std::string& output) {
  PatternSpec spec;
  spec.kind = pattern_kind_from_name(kind);
  spec.m = m;
  spec.n = n;
  spec.n_obs = n_obs;
  spec.block_fraction = block_fraction;
  spec.density = density;
  spec.seed = seed;
  const Mask mask = generate_pattern(spec);
  io::write_mask_csv(output, mask, sequence_labels("a", m), sequence_labels("c", n));
  std::cout << "wrote " << output << " (" << mask.count() << "/" << m * n << " observed)\n";
  return 0;
}

nlohmann::json diagnostics_json(const ImputationResult& res) {
  nlohmann::json d;
  d["imputed_entries"] = static_cast<int>(res.imputed_mask.count());
  d["failures"] = nlohmann::json::array();
  for (const auto& f : res.failures)
    d["failures"].push_back({{"row", f.i}, {"col", f.j}, {"reason", f.reason}});
  if (!res.entry_info.empty()) {
    d["entries"] = nlohmann::json::array();
    for (const auto& e : res.entry_info)
      d["entries"].push_back(
          {{"row", e.i}, {"col", e.j}, {"rank", e.rank}, {"residual", e.residual}});
  }
  if (res.solver) {
    d["solver"] = {{"iterations", res.solver->iterations},
                   {"objective", res.solver->objective},
                   {"converged", res.solver->converged}};
  }
  return d;
}

int cmd_impute(const std::string& method, const std::string& direction, double lambda,
               std::optional<int> k, int rank, double rcond, const std::string& input,
               const std::string& mask_path, const std::string& output,
               const std::string& diagnostics) {
  PartialTensor t = io::load_tensor(input);
  if (!mask_path.empty()) {
    const Mask hide = io::read_mask_csv(mask_path);
    if (hide.rows() != t.rows() || hide.cols() != t.cols())
      throw std::runtime_error("mask shape does not match the input");
    t = PartialTensor(std::vector<Eigen::MatrixXd>(t.slices()), t.mask() && hide,
                      t.row_labels(), t.col_labels());
  }

  EstimatorSpec spec = estimator_spec_from_json(nlohmann::json{{"method", method}});
  spec.config.lambda = lambda;
  if (k) spec.config.k_neighbors = k;
  spec.config.rank = rank;
  spec.config.pinv_rcond = rcond;
  if (!direction.empty()) spec.config.direction = direction_from_name(direction);

  std::optional<Eigen::MatrixXd> full;
  if (spec.config.method == Method::truncated_svd_oracle) {
    const PartialTensor raw = io::load_tensor(input);
    if (!raw.mask().all())
      throw std::runtime_error("truncated_svd_oracle requires a fully observed input matrix");
    full = raw.slice(0);
  }
  const ImputationResult res = impute(t, spec.config, full);

  // Completed output: predictions at missing cells, originals elsewhere.
  std::vector<Eigen::MatrixXd> completed = res.predictions;
  Mask out_mask = t.mask() || res.imputed_mask;
  const PartialTensor out(std::move(completed), std::move(out_mask), t.row_labels(),
                          t.col_labels());
  write_tensor_output(output, out, sequence_labels("y", t.depth()));
  std::cout << "wrote " << output << " (" << res.imputed_mask.count() << " entries imputed, "
            << res.failures.size() << " failures)\n";

  if (!diagnostics.empty()) {
    std::ofstream d(diagnostics);
    if (!d) throw std::runtime_error("cannot write '" + diagnostics + "'");
    d << diagnostics_json(res).dump(2) << "\n";
    std::cout << "wrote " << diagnostics << "\n";
  }
  return res.failures.empty() ? 0 : 3;
}

int cmd_evaluate(const std::string& config_path, const std::string& output,
                 const std::string& export_normalized) {
  const ExperimentConfig cfg = read_experiment_config(config_path);
  if (!export_normalized.empty()) {
    const PartialTensor t = load_experiment_input(cfg.input, cfg.seed);
    io::write_dense_csv(export_normalized, zscore_for_display(t), t.row_labels(), t.col_labels());
    std::cout << "wrote " << export_normalized << "\n";
  }
  const EvaluationReport report = run_experiment(cfg);
  write_report_csv(output, report);
  std::cout << "wrote " << output << "\n";
  for (const auto& est : report.estimators)
    std::cout << "  " << est.name << ": median R^2 = " << est.median_r2 << " (q1 " << est.q1_r2
              << ", q3 " << est.q3_r2 << ")\n";
  return 0;
}

int cmd_test(const std::string& input, const std::string& test_name, const std::string& axis_name,
             double alpha, const std::string& correction, const std::string& output) {
  const SampleStats stats = io::read_samples_manifest(input);
  const TestAxis axis = axis_name == "rows" ? TestAxis::within_rows : TestAxis::within_columns;
  TestReport report;
  if (test_name == "f")
    report = f_test_homoscedasticity(stats, axis);
  else if (test_name == "fe")
    report = welch_fe_test(stats);
  else if (test_name == "oneway")
    report = one_way_fe_test(stats, axis);
  else
    throw std::runtime_error("unknown test '" + test_name + "' (expected f, fe, or oneway)");
  apply_correction(report, alpha,
                   correction == "sidak" ? CorrectionMethod::sidak : CorrectionMethod::bonferroni);

  std::ofstream out(output);
  if (!out) throw std::runtime_error("cannot write '" + output + "'");
  out << "i,j,i2,j2,statistic,dof,p_value,reject,note\n";
  for (size_t a = 0; a < report.tests.size(); ++a) {
    const auto& t = report.tests[a];
    out << t.i << "," << t.j << "," << t.i2 << "," << t.j2 << ",";
    if (t.valid)
      out << io::format_double(t.statistic) << "," << io::format_double(t.dof) << ","
          << io::format_double(t.p_value) << "," << (report.rejections[a] ? 1 : 0);
    else
      out << ",,,";
    out << "," << t.note << "\n";
  }
  std::cout << "family size " << report.family_size << ", corrected alpha "
            << report.corrected_alpha << ", rejections " << report.rejection_count() << "\n";
  std::cout << "wrote " << output << "\n";
  return 0;
}

int cmd_svd(const std::string& input, const std::string& ranks_csv, const std::string& mask_path,
            const std::string& output) {
  const PartialTensor t = io::load_tensor(input);
  if (t.depth() != 1 || !t.mask().all())
    throw std::runtime_error("svd requires a fully observed matrix input");
  std::vector<int> ranks;
  {
    std::stringstream ss(ranks_csv);
    std::string item;
    while (std::getline(ss, item, ',')) ranks.push_back(std::stoi(item));
  }
  std::optional<Mask> pattern;
  if (!mask_path.empty()) pattern = io::read_mask_csv(mask_path);
  const SvdReport report = svd_report(t.slice(0), ranks, pattern);

  std::ofstream out(output);
  if (!out) throw std::runtime_error("cannot write '" + output + "'");
  out << "record,rank,value\n";
  for (Eigen::Index k = 0; k < report.singular_values.size(); ++k)
    out << "singular_value," << k + 1 << "," << io::format_double(report.singular_values[k])
        << "\n";
  for (const auto& [r, ev] : report.explained_variance)
    out << "explained_variance," << r << "," << io::format_double(ev) << "\n";
  for (const auto& [r, r2] : report.r2_bounds)
    out << "r2_bound," << r << "," << io::format_double(r2) << "\n";
  out << "rank1_row_constancy,," << io::format_double(report.rank1_row_constancy) << "\n";
  std::cout << "wrote " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal matrix/tensor completion toolkit"};
  app.require_subcommand(1);

  // simulate
  std::string design_path, sim_prefix = "design";
  int sim_ns = 0;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "expand an SCM design into outcome tensors");
  simulate->add_option("--design", design_path, "SCM design file (JSON)")->required();
  simulate->add_option("--output-prefix", sim_prefix, "output path prefix");
  simulate->add_option("--ns", sim_ns, "samples per cell (0 = exact expectations only)");
  simulate->add_option("--seed", sim_seed, "sampling seed");

  // pattern
  std::string pat_kind = "square_block", pat_out = "mask.csv";
  Eigen::Index pat_m = 0, pat_n = 0;
  int pat_nobs = 0;
  double pat_bf = 0.5, pat_density = 0.5;
  std::uint64_t pat_seed = 0;
  auto* pattern = app.add_subcommand("pattern", "generate an observation mask");
  pattern->add_option("--kind", pat_kind, "square_block | staircase | uniform_random");
  pattern->add_option("--m", pat_m, "rows")->required();
  pattern->add_option("--n", pat_n, "columns")->required();
  pattern->add_option("--n-obs", pat_nobs, "observed rows/columns per missing entry");
  pattern->add_option("--block-fraction", pat_bf, "staircase floor fraction");
  pattern->add_option("--density", pat_density, "uniform observation probability");
  pattern->add_option("--seed", pat_seed, "seed");
  pattern->add_option("--output", pat_out, "mask CSV path");

  // impute
  std::string imp_method, imp_direction, imp_input, imp_mask, imp_out = "completed.csv",
                                                             imp_diag;
  double imp_lambda = 0.0, imp_rcond = 1e-10;
  int imp_rank = 1;
  int imp_k = 0;
  auto* imputec = app.add_subcommand("impute", "fill missing entries of a matrix/tensor");
  imputec->add_option("--method", imp_method, "estimator name")->required();
  imputec->add_option("--direction", imp_direction, "rows | cols (SI and CF)");
  imputec->add_option("--lambda", imp_lambda, "nuclear norm penalty");
  imputec->add_option("--k", imp_k, "neighbor count (collaborative filtering)");
  imputec->add_option("--rank", imp_rank, "rank (truncated SVD oracle)");
  imputec->add_option("--pinv-rcond", imp_rcond, "pseudoinverse cutoff");
  imputec->add_option("--input", imp_input, "matrix CSV or tensor manifest")->required();
  imputec->add_option("--mask", imp_mask, "additional observation mask CSV");
  imputec->add_option("--output", imp_out, "completed output path");
  imputec->add_option("--diagnostics", imp_diag, "diagnostics sidecar (JSON)");

  // evaluate
  std::string eval_config, eval_out = "report.csv", eval_norm;
  auto* evaluate = app.add_subcommand("evaluate", "run a scored completion experiment");
  evaluate->add_option("--config", eval_config, "experiment config (JSON)")->required();
  evaluate->add_option("--output", eval_out, "report CSV path");
  evaluate->add_option("--export-normalized", eval_norm,
                       "also write a z-scored copy of the input (visualization)");

  // test
  std::string test_input, test_name = "fe", test_axis = "rows", test_corr = "bonferroni",
                          test_out = "tests.csv";
  double test_alpha = 0.05;
  auto* testc = app.add_subcommand("test", "run model-adequacy hypothesis tests");
  testc->add_option("--input", test_input, "samples manifest (JSON)")->required();
  testc->add_option("--test", test_name, "f | fe | oneway");
  testc->add_option("--axis", test_axis, "rows | cols");
  testc->add_option("--alpha", test_alpha, "familywise level");
  testc->add_option("--correction", test_corr, "bonferroni | sidak");
  testc->add_option("--output", test_out, "per-test report CSV");

  // svd
  std::string svd_input, svd_ranks = "1,2,3,4,5,6,7,8,9,10", svd_mask, svd_out = "svd.csv";
  auto* svdc = app.add_subcommand("svd", "spectrum diagnostics of a full matrix");
  svdc->add_option("--input", svd_input, "fully observed matrix CSV")->required();
  svdc->add_option("--ranks", svd_ranks, "comma separated rank list");
  svdc->add_option("--mask", svd_mask, "pattern for R^2 upper bounds");
  svdc->add_option("--output", svd_out, "report CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(design_path, sim_prefix, sim_ns, sim_seed);
    if (pattern->parsed())
      return cmd_pattern(pat_kind, pat_m, pat_n, pat_nobs, pat_bf, pat_density, pat_seed, pat_out);
    if (imputec->parsed())
      return cmd_impute(imp_method, imp_direction, imp_lambda,
                        imp_k > 0 ? std::optional<int>(imp_k) : std::nullopt, imp_rank, imp_rcond,
                        imp_input, imp_mask, imp_out, imp_diag);
    if (evaluate->parsed()) return cmd_evaluate(eval_config, eval_out, eval_norm);
    if (testc->parsed())
      return cmd_test(test_input, test_name, test_axis, test_alpha, test_corr, test_out);
    if (svdc->parsed()) return cmd_svd(svd_input, svd_ranks, svd_mask, svd_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
