#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "causalmc/partial_tensor.hpp"
#include "causalmc/random.hpp"

namespace causalmc {

/*
 * scm.hpp
 * -------
 * Linear Gaussian structural causal models and the counterfactual designs
 * built from them. A design pairs a list of actions (soft interventions on
 * the SCM) with a list of contexts (conditioning events on system
 * variables) and a set of observed variables. Expanding a design yields the
 * exact expectation tensor L with
 *
 *     L[i,j,:] = U_i v_i + U'_i w_j
 *
 * where U_i restricts (I - B_i)^{-1} to the observed rows, U'_i zeroes the
 * intervened columns of U_i, v_i is the mean of the intervention noise and
 * w_j the posterior noise mean after conditioning on the context.
 *
 * Weight matrix convention: row k of B holds the parent coefficients of the
 * mechanism of node k, i.e. Z = B Z + eps entrywise. Nodes are stored in
 * topological order, so B is strictly lower triangular and (I - B) is a
 * unit lower triangular (always invertible) matrix.
 */

// Sink for numerical-conditioning warnings (rcond below 1e-12 in a solve).
inline std::function<void(const std::string&)>& scm_warning_sink() {
  static std::function<void(const std::string&)> sink;  // default: silent
  return sink;
}

namespace detail {
inline void warn_if_ill_conditioned(double rcond, const char* where) {
  if (rcond < 1e-12 && scm_warning_sink())
    scm_warning_sink()(std::string(where) + ": condition number above 1e12 (rcond=" +
                       std::to_string(rcond) + ")");
}
}  // namespace detail

struct LinearGaussianSCM {
  Eigen::MatrixXd weights;     // q x q, strictly lower triangular
  Eigen::VectorXd noise_mean;  // mu_eps
  Eigen::VectorXd noise_var;   // sigma^2, strictly positive

  Eigen::Index nodes() const { return weights.rows(); }

  void validate() const {
    const Eigen::Index q = weights.rows();
    if (q < 1 || weights.cols() != q)
      throw std::invalid_argument("LinearGaussianSCM: weights must be square, q >= 1");
    for (Eigen::Index k = 0; k < q; ++k)
      for (Eigen::Index l = k; l < q; ++l)
        if (weights(k, l) != 0.0)
          throw std::invalid_argument(
              "LinearGaussianSCM: weights must be strictly lower triangular "
              "(store nodes in topological order)");
    if (noise_mean.size() != q || noise_var.size() != q)
      throw std::invalid_argument("LinearGaussianSCM: noise parameter size mismatch");
    for (Eigen::Index k = 0; k < q; ++k)
      if (!(noise_var[k] > 0.0))
        throw std::invalid_argument("LinearGaussianSCM: noise variances must be > 0");
  }

  bool zero_noise_mean() const { return noise_mean.isZero(0.0); }

  // Solve (I - B) x = y exactly via the unit lower triangular structure.
  Eigen::MatrixXd solve_mechanism(const Eigen::MatrixXd& y) const {
    Eigen::MatrixXd ib = Eigen::MatrixXd::Identity(nodes(), nodes()) - weights;
    return ib.triangularView<Eigen::Lower>().solve(y);
  }

  // Covariance of Z: (I-B)^{-1} diag(sigma^2) (I-B)^{-T}.
  Eigen::MatrixXd cov() const {
    Eigen::MatrixXd f = solve_mechanism(Eigen::MatrixXd::Identity(nodes(), nodes()));
    return f * noise_var.asDiagonal() * f.transpose();
  }

  Eigen::VectorXd mean() const { return solve_mechanism(noise_mean); }
};

// Soft intervention: each target node k gets a replacement mechanism row and
// replacement noise. A do-intervention do(Z_k = a) is the all-zero row with
// noise mean a and variance 0 (the only place zero variance is legal).
struct Intervention {
  std::vector<int> targets;
  Eigen::MatrixXd new_rows;        // |targets| x q, aligned with `targets`
  Eigen::VectorXd new_noise_mean;  // per target
  Eigen::VectorXd new_noise_var;   // per target, >= 0

  static Intervention none() { return Intervention{}; }

  static Intervention do_values(const std::vector<int>& nodes, const Eigen::VectorXd& values,
                                Eigen::Index q) {
    if (static_cast<Eigen::Index>(nodes.size()) != values.size())
      throw std::invalid_argument("do_values: node/value count mismatch");
    Intervention iv;
    iv.targets = nodes;
    iv.new_rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes.size()), q);
    iv.new_noise_mean = values;
    iv.new_noise_var = Eigen::VectorXd::Zero(values.size());
    return iv;
  }

  void validate(Eigen::Index q) const {
    const Eigen::Index nt = static_cast<Eigen::Index>(targets.size());
    if (new_rows.rows() != nt || (nt > 0 && new_rows.cols() != q))
      throw std::invalid_argument("Intervention: replacement row shape mismatch");
    if (new_noise_mean.size() != nt || new_noise_var.size() != nt)
      throw std::invalid_argument("Intervention: noise parameter size mismatch");
    for (size_t a = 0; a < targets.size(); ++a) {
      int k = targets[a];
      if (k < 0 || k >= q) throw std::out_of_range("Intervention: target out of range");
      for (size_t b = a + 1; b < targets.size(); ++b)
        if (targets[b] == k) throw std::invalid_argument("Intervention: duplicate target");
      for (Eigen::Index l = k; l < q; ++l)
        if (new_rows(static_cast<Eigen::Index>(a), l) != 0.0)
          throw std::invalid_argument("Intervention: replacement row breaks acyclicity");
      if (new_noise_var[static_cast<Eigen::Index>(a)] < 0.0)
        throw std::invalid_argument("Intervention: negative noise variance");
    }
  }
};

// Conditioning event Z_C = c for an ordered duplicate-free node subset C.
struct Context {
  std::vector<int> cond_nodes;
  Eigen::VectorXd cond_values;

  static Context none() { return Context{}; }

  void validate(Eigen::Index q) const {
    if (static_cast<Eigen::Index>(cond_nodes.size()) != cond_values.size())
      throw std::invalid_argument("Context: node/value count mismatch");
    for (size_t a = 0; a < cond_nodes.size(); ++a) {
      if (cond_nodes[a] < 0 || cond_nodes[a] >= q)
        throw std::out_of_range("Context: conditioning node out of range");
      for (size_t b = a + 1; b < cond_nodes.size(); ++b)
        if (cond_nodes[b] == cond_nodes[a])
          throw std::invalid_argument("Context: duplicate conditioning node");
      if (!std::isfinite(cond_values[static_cast<Eigen::Index>(a)]))
        throw std::invalid_argument("Context: non-finite conditioning value");
    }
  }
};

struct CounterfactualDesign {
  LinearGaussianSCM scm;
  std::vector<Intervention> actions;
  std::vector<Context> contexts;
  std::vector<int> observed;  // X, ordered

  Eigen::Index num_actions() const { return static_cast<Eigen::Index>(actions.size()); }
  Eigen::Index num_contexts() const { return static_cast<Eigen::Index>(contexts.size()); }
  Eigen::Index num_outcomes() const { return static_cast<Eigen::Index>(observed.size()); }

  void validate() const {
    scm.validate();
    if (actions.empty() || contexts.empty() || observed.empty())
      throw std::invalid_argument("CounterfactualDesign: actions, contexts and observed set must be nonempty");
    for (const auto& a : actions) a.validate(scm.nodes());
    for (const auto& c : contexts) c.validate(scm.nodes());
    for (size_t a = 0; a < observed.size(); ++a) {
      if (observed[a] < 0 || observed[a] >= scm.nodes())
        throw std::out_of_range("CounterfactualDesign: observed node out of range");
      for (size_t b = a + 1; b < observed.size(); ++b)
        if (observed[b] == observed[a])
          throw std::invalid_argument("CounterfactualDesign: duplicate observed node");
    }
  }
};

namespace detail {

inline std::vector<int> complement(Eigen::Index q, const std::vector<int>& idx) {
  std::vector<bool> in(static_cast<size_t>(q), false);
  for (int k : idx) in[static_cast<size_t>(k)] = true;
  std::vector<int> out;
  for (Eigen::Index k = 0; k < q; ++k)
    if (!in[static_cast<size_t>(k)]) out.push_back(static_cast<int>(k));
  return out;
}

inline Eigen::MatrixXd sub_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

inline Eigen::MatrixXd sub_block(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                                 const std::vector<int>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
  return out;
}

// Dense solve with partial pivoting; warns when rcond drops below 1e-12 and
// throws when the block is singular.
inline Eigen::MatrixXd pivot_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const char* where) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  double rcond = lu.rcond();
  if (!(rcond > 0.0) || !std::isfinite(rcond))
    throw std::runtime_error(std::string(where) + ": singular conditioning block");
  warn_if_ill_conditioned(rcond, where);
  return lu.solve(b);
}

}  // namespace detail

// Posterior noise mean w = E(eps | Z_C = c). Computed by conditioning Z on
// Z_C = c (Schur complement on the covariance of Z) and mapping back through
// the mechanism: w = (I - B) E(Z | Z_C = c).
inline Eigen::VectorXd condition_noise_mean(const LinearGaussianSCM& scm, const Context& ctx) {
  ctx.validate(scm.nodes());
  if (ctx.cond_nodes.empty()) return scm.noise_mean;
  const Eigen::Index q = scm.nodes();
  const std::vector<int>& cset = ctx.cond_nodes;
  const std::vector<int> rest = detail::complement(q, cset);

  const Eigen::MatrixXd sigma = scm.cov();
  const Eigen::VectorXd mu_z = scm.mean();

  Eigen::VectorXd mu_c(static_cast<Eigen::Index>(cset.size()));
  for (size_t a = 0; a < cset.size(); ++a) mu_c[static_cast<Eigen::Index>(a)] = mu_z[cset[a]];

  Eigen::VectorXd ez(q);
  for (size_t a = 0; a < cset.size(); ++a) ez[cset[a]] = ctx.cond_values[static_cast<Eigen::Index>(a)];
  if (!rest.empty()) {
    const Eigen::MatrixXd s_rc = detail::sub_block(sigma, rest, cset);
    const Eigen::MatrixXd s_cc = detail::sub_block(sigma, cset, cset);
    // E(Z_rest | Z_C = c) = mu_rest + S_rc S_cc^{-1} (c - mu_C)
    const Eigen::VectorXd shift =
        s_rc * detail::pivot_solve(s_cc, (ctx.cond_values - mu_c).eval(), "condition_noise_mean");
    for (size_t a = 0; a < rest.size(); ++a)
      ez[rest[a]] = mu_z[rest[a]] + shift[static_cast<Eigen::Index>(a)];
  }
  return (Eigen::MatrixXd::Identity(q, q) - scm.weights) * ez;
}

// Linear map from conditioning values to posterior noise means for a fixed
// conditioning node set. With zero noise means: w = W c, W of shape
// q x |C|. With nonzero means the affine part is absorbed into a leading
// column and w = W (1, c), W of shape q x (1 + |C|).
inline Eigen::MatrixXd context_factor_matrix(const LinearGaussianSCM& scm,
                                             const std::vector<int>& cond_nodes) {
  Context probe{cond_nodes, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cond_nodes.size()))};
  probe.validate(scm.nodes());
  if (cond_nodes.empty())
    throw std::invalid_argument("context_factor_matrix: empty conditioning set");
  const Eigen::Index q = scm.nodes();
  const Eigen::Index nc = static_cast<Eigen::Index>(cond_nodes.size());
  const std::vector<int> rest = detail::complement(q, cond_nodes);

  const Eigen::MatrixXd sigma = scm.cov();
  const Eigen::MatrixXd s_cc = detail::sub_block(sigma, cond_nodes, cond_nodes);

  // Rows of M map (1, c) to E(Z | Z_C = c); conditioned rows pass c through.
  const bool affine = !scm.zero_noise_mean();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, affine ? 1 + nc : nc);
  const Eigen::Index off = affine ? 1 : 0;
  for (Eigen::Index a = 0; a < nc; ++a) m(cond_nodes[static_cast<size_t>(a)], off + a) = 1.0;
  if (!rest.empty()) {
    const Eigen::MatrixXd s_rc = detail::sub_block(sigma, rest, cond_nodes);
    const Eigen::MatrixXd gain =
        s_rc * detail::pivot_solve(s_cc, Eigen::MatrixXd::Identity(nc, nc), "context_factor_matrix");
    for (size_t r = 0; r < rest.size(); ++r)
      m.block(0, off, q, nc).row(rest[r]) = gain.row(static_cast<Eigen::Index>(r));
    if (affine) {
      const Eigen::VectorXd mu_z = scm.mean();
      Eigen::VectorXd mu_c(nc);
      for (Eigen::Index a = 0; a < nc; ++a) mu_c[a] = mu_z[cond_nodes[static_cast<size_t>(a)]];
      for (size_t r = 0; r < rest.size(); ++r)
        m(rest[r], 0) = mu_z[rest[r]] - gain.row(static_cast<Eigen::Index>(r)).dot(mu_c);
    }
  }
  return (Eigen::MatrixXd::Identity(q, q) - scm.weights) * m;
}

// Mechanism and noise description after applying an intervention. Nodes
// outside the target set keep the base mechanism and base noise.
struct IntervenedSCM {
  Eigen::MatrixXd weights;          // B_i
  std::vector<int> targets;         // A_i, sorted
  std::vector<bool> is_target;      // size q
  Eigen::VectorXd fresh_noise_mean; // mean of the replacement noise, 0 off-target
  Eigen::VectorXd fresh_noise_var;  // variance of the replacement noise, 0 off-target

  Eigen::MatrixXd solve_mechanism(const Eigen::MatrixXd& y) const {
    Eigen::MatrixXd ib = Eigen::MatrixXd::Identity(weights.rows(), weights.rows()) - weights;
    return ib.triangularView<Eigen::Lower>().solve(y);
  }
};

inline IntervenedSCM apply_intervention(const LinearGaussianSCM& scm, const Intervention& iv) {
  iv.validate(scm.nodes());
  const Eigen::Index q = scm.nodes();
  IntervenedSCM out;
  out.weights = scm.weights;
  out.targets = iv.targets;
  std::sort(out.targets.begin(), out.targets.end());
  out.is_target.assign(static_cast<size_t>(q), false);
  out.fresh_noise_mean = Eigen::VectorXd::Zero(q);
  out.fresh_noise_var = Eigen::VectorXd::Zero(q);
  for (size_t a = 0; a < iv.targets.size(); ++a) {
    const int k = iv.targets[a];
    out.weights.row(k) = iv.new_rows.row(static_cast<Eigen::Index>(a));
    out.is_target[static_cast<size_t>(k)] = true;
    out.fresh_noise_mean[k] = iv.new_noise_mean[static_cast<Eigen::Index>(a)];
    out.fresh_noise_var[k] = iv.new_noise_var[static_cast<Eigen::Index>(a)];
  }
  return out;
}

// Per-action and per-context factors of the expectation tensor.
struct ActionFactor {
  Eigen::MatrixXd u;        // U_i, p x q
  Eigen::MatrixXd u_prime;  // U'_i = U_i with intervened columns zeroed
  Eigen::VectorXd v;        // v_i, mean of the intervention noise
};

struct FactorDecomposition {
  std::vector<ActionFactor> action;           // length m
  std::vector<Eigen::VectorXd> context_mean;  // w_j, length n
  // Present when every context conditions on the same node set and the SCM
  // has zero noise means; then w_j = shared_context_map * c_j.
  std::optional<Eigen::MatrixXd> shared_context_map;
};

namespace detail {

inline ActionFactor action_factor(const LinearGaussianSCM& scm, const Intervention& iv,
                                  const std::vector<int>& observed) {
  const IntervenedSCM post = apply_intervention(scm, iv);
  const Eigen::Index q = scm.nodes();
  const Eigen::MatrixXd inv = post.solve_mechanism(Eigen::MatrixXd::Identity(q, q));
  ActionFactor f;
  f.u = sub_rows(inv, observed);
  f.u_prime = f.u;
  for (int k : post.targets) f.u_prime.col(k).setZero();
  f.v = post.fresh_noise_mean;
  return f;
}

}  // namespace detail

inline Eigen::VectorXd counterfactual_mean(const CounterfactualDesign& design, Eigen::Index i,
                                           Eigen::Index j) {
  if (i < 0 || i >= design.num_actions() || j < 0 || j >= design.num_contexts())
    throw std::out_of_range("counterfactual_mean: action or context index out of range");
  const ActionFactor f =
      detail::action_factor(design.scm, design.actions[static_cast<size_t>(i)], design.observed);
  const Eigen::VectorXd w =
      condition_noise_mean(design.scm, design.contexts[static_cast<size_t>(j)]);
  return f.u * f.v + f.u_prime * w;
}

// Dense expectation tensor of the design. Every cell is exact.
inline PartialTensor expand_design(const CounterfactualDesign& design) {
  design.validate();
  const Eigen::Index m = design.num_actions();
  const Eigen::Index n = design.num_contexts();
  const Eigen::Index p = design.num_outcomes();

  std::vector<ActionFactor> af;
  af.reserve(static_cast<size_t>(m));
  for (const auto& a : design.actions)
    af.push_back(detail::action_factor(design.scm, a, design.observed));
  std::vector<Eigen::VectorXd> w;
  w.reserve(static_cast<size_t>(n));
  for (const auto& c : design.contexts) w.push_back(condition_noise_mean(design.scm, c));

  std::vector<Eigen::MatrixXd> slices(static_cast<size_t>(p), Eigen::MatrixXd(m, n));
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& f = af[static_cast<size_t>(i)];
    const Eigen::VectorXd fixed = f.u * f.v;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::VectorXd mean = fixed + f.u_prime * w[static_cast<size_t>(j)];
      for (Eigen::Index k = 0; k < p; ++k) slices[static_cast<size_t>(k)](i, j) = mean[k];
    }
  }
  return PartialTensor::dense(std::move(slices));
}

inline FactorDecomposition factor_decomposition(const CounterfactualDesign& design) {
  design.validate();
  FactorDecomposition fd;
  for (const auto& a : design.actions)
    fd.action.push_back(detail::action_factor(design.scm, a, design.observed));
  for (const auto& c : design.contexts)
    fd.context_mean.push_back(condition_noise_mean(design.scm, c));

  bool shared = design.scm.zero_noise_mean() && !design.contexts.empty() &&
                !design.contexts.front().cond_nodes.empty();
  for (size_t j = 1; shared && j < design.contexts.size(); ++j)
    shared = design.contexts[j].cond_nodes == design.contexts.front().cond_nodes;
  if (shared)
    fd.shared_context_map = context_factor_matrix(design.scm, design.contexts.front().cond_nodes);
  return fd;
}

// Folded per-action factor [U_i v_i | U'_i]; the matching context factor is
// (1, w_j), so their product reproduces L[i,j,:] exactly.
inline Eigen::MatrixXd folded_action_factor(const ActionFactor& f) {
  Eigen::MatrixXd out(f.u.rows(), 1 + f.u.cols());
  out.col(0) = f.u * f.v;
  out.rightCols(f.u.cols()) = f.u_prime;
  return out;
}

// Per-cell means and unbiased variances of a finite sample of the design.
struct SampleStats {
  Eigen::MatrixXd means;  // m x n
  Eigen::MatrixXd vars;   // m x n, divisor ns - 1
  int ns = 0;
  Mask mask;
};

struct DesignSample {
  PartialTensor means;                   // per-cell sample means, fully observed
  std::vector<SampleStats> stats;        // one per outcome coordinate
};

// Samples each cell of the design ns times. A draw conditions the exogenous
// noise on the context (exact joint Gaussian conditioning of (eps, Z_C)),
// replaces the noise of intervened nodes with fresh intervention noise, and
// pushes the result through the intervened mechanism. The random stream of
// cell (i, j) depends only on (seed, i, j), so any evaluation order gives
// identical output.
inline DesignSample sample_design(const CounterfactualDesign& design, int ns, std::uint64_t seed) {
  design.validate();
  if (ns < 1) throw std::invalid_argument("sample_design: ns must be >= 1");
  const Eigen::Index q = design.scm.nodes();
  const Eigen::Index m = design.num_actions();
  const Eigen::Index n = design.num_contexts();
  const Eigen::Index p = design.num_outcomes();

  std::vector<IntervenedSCM> post;
  post.reserve(static_cast<size_t>(m));
  for (const auto& a : design.actions) post.push_back(apply_intervention(design.scm, a));

  // Posterior of eps given each context: mean and a symmetric square root of
  // the (possibly singular) posterior covariance.
  struct Posterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd sqrt_cov;
  };
  std::vector<Posterior> posterior;
  posterior.reserve(static_cast<size_t>(n));
  const Eigen::MatrixXd f_full =
      design.scm.solve_mechanism(Eigen::MatrixXd::Identity(q, q));
  for (const auto& ctx : design.contexts) {
    Posterior ps;
    Eigen::MatrixXd cov;
    if (ctx.cond_nodes.empty()) {
      ps.mean = design.scm.noise_mean;
      cov = Eigen::MatrixXd(design.scm.noise_var.asDiagonal());
    } else {
      const Eigen::MatrixXd f_c = detail::sub_rows(f_full, ctx.cond_nodes);
      const Eigen::MatrixXd cross = design.scm.noise_var.asDiagonal() * f_c.transpose();
      const Eigen::MatrixXd s_cc = f_c * cross;
      const Eigen::MatrixXd gain =
          detail::pivot_solve(s_cc, cross.transpose(), "sample_design").transpose();  // q x |C|
      const Eigen::VectorXd mu_c = f_c * design.scm.noise_mean;
      ps.mean = design.scm.noise_mean + gain * (ctx.cond_values - mu_c);
      cov = Eigen::MatrixXd(design.scm.noise_var.asDiagonal()) - gain * cross.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    ps.sqrt_cov = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    posterior.push_back(std::move(ps));
  }

  std::vector<Eigen::MatrixXd> mean_slices(static_cast<size_t>(p), Eigen::MatrixXd(m, n));
  std::vector<SampleStats> stats(static_cast<size_t>(p));
  for (auto& s : stats) {
    s.means = Eigen::MatrixXd(m, n);
    s.vars = Eigen::MatrixXd::Zero(m, n);
    s.ns = ns;
    s.mask = Mask::Constant(m, n, true);
  }

  Eigen::VectorXd xi(q), eps(q), z(q), y(p);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& pi = post[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& ps = posterior[static_cast<size_t>(j)];
      auto gen = rng::stream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
      std::normal_distribution<double> normal(0.0, 1.0);
      // Welford accumulation per coordinate.
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
      Eigen::VectorXd m2 = Eigen::VectorXd::Zero(p);
      for (int s = 0; s < ns; ++s) {
        for (Eigen::Index k = 0; k < q; ++k) xi[k] = normal(gen);
        eps = ps.mean + ps.sqrt_cov * xi;
        for (int k : pi.targets) {
          const double sd = std::sqrt(pi.fresh_noise_var[k]);
          eps[k] = pi.fresh_noise_mean[k] + (sd > 0.0 ? sd * normal(gen) : 0.0);
        }
        z = pi.solve_mechanism(eps);
        for (Eigen::Index k = 0; k < p; ++k) y[k] = z[design.observed[static_cast<size_t>(k)]];
        const Eigen::VectorXd delta = y - mean;
        mean += delta / static_cast<double>(s + 1);
        m2 += delta.cwiseProduct(y - mean);
      }
      for (Eigen::Index k = 0; k < p; ++k) {
        mean_slices[static_cast<size_t>(k)](i, j) = mean[k];
        stats[static_cast<size_t>(k)].means(i, j) = mean[k];
        if (ns > 1) stats[static_cast<size_t>(k)].vars(i, j) = std::max(0.0, m2[k] / (ns - 1.0));
      }
    }
  }

  DesignSample out;
  out.means = PartialTensor::dense(std::move(mean_slices));
  out.stats = std::move(stats);
  return out;
}

}  // namespace causalmc
