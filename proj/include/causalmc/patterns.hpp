#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "causalmc/partial_tensor.hpp"
#include "causalmc/random.hpp"

namespace causalmc {

/*
 * patterns.hpp
 * ------------
 * Deterministic observation-mask generators. Every generator guarantees
 * that each missing entry keeps at least one observed entry in its row and
 * in its column, and is fully reproducible from its spec (including seed).
 */

enum class PatternKind { square_block, staircase, uniform_random };

struct PatternSpec {
  PatternKind kind = PatternKind::square_block;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  int n_obs = 0;                // square_block: observed rows/columns per missing entry
  double block_fraction = 0.5;  // staircase shape parameter, in (0, 1)
  double density = 0.5;         // uniform_random, in (0, 1]
  std::uint64_t seed = 0;
};

// L-shaped mask: the first n_obs rows and the first n_obs columns are
// observed, the remaining bottom-right block is missing. Every missing
// entry sees exactly n_obs observed entries along its row and its column.
inline Mask square_block_pattern(const PatternSpec& spec) {
  if (spec.m < 1 || spec.n < 1) throw std::invalid_argument("square_block_pattern: empty shape");
  if (spec.n_obs < 1 || spec.n_obs >= std::min(spec.m, spec.n))
    throw std::invalid_argument("square_block_pattern: n_obs must be in [1, min(m,n))");
  Mask mask = Mask::Constant(spec.m, spec.n, false);
  mask.topRows(spec.n_obs).setConstant(true);
  mask.leftCols(spec.n_obs).setConstant(true);
  return mask;
}

namespace detail {
// Monotone nonincreasing column height: concave interpolation from m at the
// first column down to m * block_fraction at the last one.
inline Eigen::Index staircase_height(Eigen::Index m, Eigen::Index n, double bf, Eigen::Index j) {
  const double u = (n == 1) ? 0.0 : static_cast<double>(j) / static_cast<double>(n - 1);
  const double h = static_cast<double>(m) * (1.0 - (1.0 - bf) * std::sqrt(u));
  return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::llround(h)), 1, m);
}
}  // namespace detail

// Column j observes its top k(j) rows, with k(j) a concave nonincreasing
// profile from m down to m * block_fraction.
inline Mask staircase_pattern(const PatternSpec& spec) {
  if (spec.m < 1 || spec.n < 1) throw std::invalid_argument("staircase_pattern: empty shape");
  if (!(spec.block_fraction > 0.0) || !(spec.block_fraction < 1.0))
    throw std::invalid_argument("staircase_pattern: block_fraction must be in (0,1)");
  if (static_cast<double>(spec.m) * spec.block_fraction < 1.0)
    throw std::invalid_argument("staircase_pattern: profile floor below one row");
  Mask mask = Mask::Constant(spec.m, spec.n, false);
  for (Eigen::Index j = 0; j < spec.n; ++j) {
    const Eigen::Index k = detail::staircase_height(spec.m, spec.n, spec.block_fraction, j);
    mask.col(j).head(k).setConstant(true);
  }
  return mask;
}

// Independent Bernoulli(density) cells; the whole mask is redrawn until it
// has no empty row or column (bounded retries).
inline Mask uniform_random_pattern(const PatternSpec& spec) {
  if (spec.m < 1 || spec.n < 1) throw std::invalid_argument("uniform_random_pattern: empty shape");
  if (!(spec.density > 0.0) || spec.density > 1.0)
    throw std::invalid_argument("uniform_random_pattern: density must be in (0,1]");
  auto gen = rng::stream(spec.seed, 0x70617474ULL);  // one stream for all retries
  std::bernoulli_distribution obs(spec.density);
  constexpr int kMaxRetries = 1000;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    Mask mask(spec.m, spec.n);
    for (Eigen::Index i = 0; i < spec.m; ++i)
      for (Eigen::Index j = 0; j < spec.n; ++j) mask(i, j) = obs(gen);
    const bool ok = (mask.rowwise().count() > 0).all() && (mask.colwise().count() > 0).all();
    if (ok) return mask;
  }
  throw std::runtime_error("uniform_random_pattern: retries exhausted without a valid mask");
}

inline Mask generate_pattern(const PatternSpec& spec) {
  switch (spec.kind) {
    case PatternKind::square_block: return square_block_pattern(spec);
    case PatternKind::staircase: return staircase_pattern(spec);
    case PatternKind::uniform_random: return uniform_random_pattern(spec);
  }
  throw std::invalid_argument("generate_pattern: unknown kind");
}

// Seeded row/column shuffle followed by a leading-block crop. Labels are
// permuted together with the data.
inline PartialTensor shuffle_and_crop(const PartialTensor& t, Eigen::Index rows,
                                      Eigen::Index cols, std::uint64_t seed) {
  if (rows < 1 || rows > t.rows() || cols < 1 || cols > t.cols())
    throw std::invalid_argument("shuffle_and_crop: crop does not fit the tensor");
  std::vector<Eigen::Index> rp(static_cast<size_t>(t.rows())), cp(static_cast<size_t>(t.cols()));
  std::iota(rp.begin(), rp.end(), 0);
  std::iota(cp.begin(), cp.end(), 0);
  auto gen_r = rng::stream(seed, 0x726F7773ULL);
  auto gen_c = rng::stream(seed, 0x636F6C73ULL);
  std::shuffle(rp.begin(), rp.end(), gen_r);
  std::shuffle(cp.begin(), cp.end(), gen_c);

  std::vector<Eigen::MatrixXd> slices;
  for (Eigen::Index k = 0; k < t.depth(); ++k) {
    Eigen::MatrixXd s(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        s(i, j) = t.slice(k)(rp[static_cast<size_t>(i)], cp[static_cast<size_t>(j)]);
    slices.push_back(std::move(s));
  }
  Mask mask(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      mask(i, j) = t.mask()(rp[static_cast<size_t>(i)], cp[static_cast<size_t>(j)]);

  std::vector<std::string> rl, cl;
  if (!t.row_labels().empty())
    for (Eigen::Index i = 0; i < rows; ++i)
      rl.push_back(t.row_labels()[static_cast<size_t>(rp[static_cast<size_t>(i)])]);
  if (!t.col_labels().empty())
    for (Eigen::Index j = 0; j < cols; ++j)
      cl.push_back(t.col_labels()[static_cast<size_t>(cp[static_cast<size_t>(j)])]);
  return PartialTensor(std::move(slices), std::move(mask), std::move(rl), std::move(cl));
}

}  // namespace causalmc
