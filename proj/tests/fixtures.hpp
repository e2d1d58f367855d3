#pragma once

// Shared test fixtures: the hand-checkable two-node-chain design whose
// 4x4x2 counterfactual tensor is known in closed form, and random design
// generators for property-style tests.

#include <random>
#include <vector>

#include "causalmc/scm.hpp"

namespace fixtures {

using namespace causalmc;

// Chain Z1 -> Z2 with unit weight and unit noise variances.
inline LinearGaussianSCM chain2() {
  LinearGaussianSCM scm;
  scm.weights = Eigen::MatrixXd::Zero(2, 2);
  scm.weights(1, 0) = 1.0;
  scm.noise_mean = Eigen::VectorXd::Zero(2);
  scm.noise_var = Eigen::VectorXd::Ones(2);
  return scm;
}

inline Context both_nodes(double c1, double c2) {
  Context ctx;
  ctx.cond_nodes = {0, 1};
  ctx.cond_values = Eigen::Vector2d(c1, c2);
  return ctx;
}

// Four do-interventions x four contexts on the chain, observing both nodes.
// The expected tensor is exactly:
//   slice Z1:  1 1 1 1 | 1 0 1 0 | 1 1 1 1 | 0 0 0 0
//   slice Z2:  0 2 1 1 | 1 1 1 1 | 1 1 1 1 | 1 1 1 1   (rows of 4)
inline CounterfactualDesign golden_design() {
  CounterfactualDesign d;
  d.scm = chain2();
  d.actions = {
      Intervention::do_values({0}, Eigen::VectorXd::Constant(1, 1.0), 2),
      Intervention::do_values({1}, Eigen::VectorXd::Constant(1, 1.0), 2),
      Intervention::do_values({0, 1}, Eigen::Vector2d(1.0, 1.0), 2),
      Intervention::do_values({0, 1}, Eigen::Vector2d(0.0, 1.0), 2),
  };
  d.contexts = {both_nodes(1, 0), both_nodes(0, 1), both_nodes(1, 1), both_nodes(0, 0)};
  d.observed = {0, 1};
  return d;
}

inline Eigen::MatrixXd golden_slice1() {
  Eigen::MatrixXd s(4, 4);
  s << 1, 1, 1, 1,
       1, 0, 1, 0,
       1, 1, 1, 1,
       0, 0, 0, 0;
  return s;
}

inline Eigen::MatrixXd golden_slice2() {
  Eigen::MatrixXd s(4, 4);
  s << 0, 2, 1, 1,
       1, 1, 1, 1,
       1, 1, 1, 1,
       1, 1, 1, 1;
  return s;
}

// Random strictly-lower-triangular SCM; weights bounded away from zero.
inline LinearGaussianSCM random_scm(int q, std::mt19937_64& gen, bool zero_means = true,
                                    double edge_prob = 0.6) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.25, 1.0);
  std::uniform_real_distribution<double> mean(-1.0, 1.0);
  std::uniform_real_distribution<double> var(0.5, 2.0);
  LinearGaussianSCM scm;
  scm.weights = Eigen::MatrixXd::Zero(q, q);
  for (int k = 1; k < q; ++k)
    for (int l = 0; l < k; ++l)
      if (unit(gen) < edge_prob)
        scm.weights(k, l) = (unit(gen) < 0.5 ? -1.0 : 1.0) * mag(gen);
  scm.noise_mean = Eigen::VectorXd::Zero(q);
  if (!zero_means)
    for (int k = 0; k < q; ++k) scm.noise_mean[k] = mean(gen);
  scm.noise_var = Eigen::VectorXd::Ones(q);
  for (int k = 0; k < q; ++k) scm.noise_var[k] = var(gen);
  return scm;
}

inline std::vector<int> random_subset(int q, double prob, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> out;
  for (int k = 0; k < q; ++k)
    if (unit(gen) < prob) out.push_back(k);
  return out;
}

// Random soft or do intervention with valid (strictly lower triangular)
// replacement rows.
inline Intervention random_intervention(const LinearGaussianSCM& scm, std::mt19937_64& gen,
                                        double target_prob = 0.4) {
  const int q = static_cast<int>(scm.nodes());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> mean(-2.0, 2.0);
  Intervention iv;
  iv.targets = random_subset(q, target_prob, gen);
  const int nt = static_cast<int>(iv.targets.size());
  iv.new_rows = Eigen::MatrixXd::Zero(nt, q);
  iv.new_noise_mean = Eigen::VectorXd::Zero(nt);
  iv.new_noise_var = Eigen::VectorXd::Zero(nt);
  for (int a = 0; a < nt; ++a) {
    const bool hard = unit(gen) < 0.5;
    iv.new_noise_mean[a] = mean(gen);
    if (!hard) {
      for (int l = 0; l < iv.targets[static_cast<size_t>(a)]; ++l)
        if (unit(gen) < 0.5) iv.new_rows(a, l) = coef(gen);
      iv.new_noise_var[a] = 0.5 + unit(gen);
    }
  }
  return iv;
}

inline Context random_context(const LinearGaussianSCM& scm, std::mt19937_64& gen,
                              double node_prob = 0.5) {
  const int q = static_cast<int>(scm.nodes());
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  Context ctx;
  ctx.cond_nodes = random_subset(q, node_prob, gen);
  ctx.cond_values = Eigen::VectorXd(static_cast<Eigen::Index>(ctx.cond_nodes.size()));
  for (Eigen::Index a = 0; a < ctx.cond_values.size(); ++a) ctx.cond_values[a] = value(gen);
  return ctx;
}

inline CounterfactualDesign random_design(int q, int m, int n, std::mt19937_64& gen,
                                          bool zero_means = true) {
  CounterfactualDesign d;
  d.scm = random_scm(q, gen, zero_means);
  for (int i = 0; i < m; ++i) d.actions.push_back(random_intervention(d.scm, gen));
  for (int j = 0; j < n; ++j) d.contexts.push_back(random_context(d.scm, gen));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < q; ++k)
    if (unit(gen) < 0.5) d.observed.push_back(k);
  if (d.observed.empty()) d.observed.push_back(q - 1);
  return d;
}

}  // namespace fixtures
