#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "causalmc/patterns.hpp"

using namespace causalmc;

namespace {

PatternSpec square_spec(Eigen::Index m, Eigen::Index n, int n_obs) {
  PatternSpec s;
  s.kind = PatternKind::square_block;
  s.m = m;
  s.n = n;
  s.n_obs = n_obs;
  return s;
}

bool no_empty_lines(const Mask& mask) {
  return (mask.rowwise().count() > 0).all() && (mask.colwise().count() > 0).all();
}

}  // namespace

TEST_CASE("square block pattern exposes a constant number of observations") {
  const Mask mask = square_block_pattern(square_spec(10, 10, 6));
  CHECK(static_cast<int>((!mask).count()) == 16);  // 4x4 missing block
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = 0; j < 10; ++j)
      if (!mask(i, j)) {
        CHECK(mask.row(i).count() == 6);
        CHECK(mask.col(j).count() == 6);
      }
}

TEST_CASE("square block observation count matches the closed form") {
  for (int n_obs : {5, 30, 144, 288}) {
    const Mask mask = square_block_pattern(square_spec(289, 289, n_obs));
    const Eigen::Index expect = 289 * 289 - (289 - n_obs) * (289 - n_obs);
    CHECK(mask.count() == expect);
  }
}

TEST_CASE("square block with n_obs = min-1 leaves exactly one missing entry") {
  const Mask mask = square_block_pattern(square_spec(7, 9, 6));
  CHECK(static_cast<int>((!mask).count()) == 3);  // (7-6)*(9-6)
  const Mask square = square_block_pattern(square_spec(7, 7, 6));
  CHECK(static_cast<int>((!square).count()) == 1);
}

TEST_CASE("square block rejects out-of-range n_obs") {
  CHECK_THROWS_AS(square_block_pattern(square_spec(10, 10, 0)), std::invalid_argument);
  CHECK_THROWS_AS(square_block_pattern(square_spec(10, 10, 10)), std::invalid_argument);
}

TEST_CASE("staircase with block fraction near one is fully observed") {
  PatternSpec s;
  s.kind = PatternKind::staircase;
  s.m = 50;
  s.n = 40;
  s.block_fraction = 0.9999;
  CHECK(staircase_pattern(s).all());
}

TEST_CASE("staircase heights are monotone and match the profile sum") {
  PatternSpec s;
  s.kind = PatternKind::staircase;
  s.m = 100;
  s.n = 100;
  s.block_fraction = 0.5;
  const Mask mask = staircase_pattern(s);
  Eigen::Index prev = mask.col(0).count();
  CHECK(prev == 100);
  Eigen::Index total = prev;
  for (Eigen::Index j = 1; j < 100; ++j) {
    const Eigen::Index k = mask.col(j).count();
    CHECK(k <= prev);
    CHECK(mask.col(j).head(k).all());  // contiguous top block
    prev = k;
    total += k;
  }
  // independent transcription of the height profile
  Eigen::Index expect = 0;
  for (int j = 0; j < 100; ++j) {
    const double u = j / 99.0;
    expect += std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::llround(100.0 * (1.0 - 0.5 * std::sqrt(u)))), 1, 100);
  }
  CHECK(total == expect);
  CHECK(mask.count() == total);
  CHECK(no_empty_lines(mask));
}

TEST_CASE("staircase missing entries keep observed company") {
  PatternSpec s;
  s.kind = PatternKind::staircase;
  s.m = 37;
  s.n = 23;
  s.block_fraction = 0.31;
  const Mask mask = staircase_pattern(s);
  for (Eigen::Index i = 0; i < s.m; ++i)
    for (Eigen::Index j = 0; j < s.n; ++j)
      if (!mask(i, j)) {
        CHECK(mask.row(i).count() >= 1);
        CHECK(mask.col(j).count() >= 1);
      }
  PatternSpec bad = s;
  bad.block_fraction = 1.5;
  CHECK_THROWS_AS(staircase_pattern(bad), std::invalid_argument);
}

TEST_CASE("uniform pattern at density one observes everything") {
  PatternSpec s;
  s.kind = PatternKind::uniform_random;
  s.m = 12;
  s.n = 8;
  s.density = 1.0;
  CHECK(uniform_random_pattern(s).all());
}

TEST_CASE("uniform pattern concentrates near its expected count") {
  PatternSpec s;
  s.kind = PatternKind::uniform_random;
  s.m = 100;
  s.n = 100;
  s.density = 0.5;
  s.seed = 17;
  const Mask mask = uniform_random_pattern(s);
  const double slack = 3.0 * std::sqrt(100.0 * 100.0 * 0.25);
  CHECK(std::abs(static_cast<double>(mask.count()) - 5000.0) < slack);
  CHECK(no_empty_lines(mask));
}

TEST_CASE("uniform pattern is deterministic per seed") {
  PatternSpec s;
  s.kind = PatternKind::uniform_random;
  s.m = 30;
  s.n = 20;
  s.density = 0.4;
  s.seed = 5;
  const Mask a = uniform_random_pattern(s);
  const Mask b = uniform_random_pattern(s);
  CHECK((a == b).all());
  s.seed = 6;
  CHECK((uniform_random_pattern(s) != a).any());
  s.density = 0.0;
  CHECK_THROWS_AS(uniform_random_pattern(s), std::invalid_argument);
}

TEST_CASE("full-size shuffle preserves the multiset of values and labels") {
  Eigen::MatrixXd values(3, 4);
  values << 1, 2, 3, 4,
            5, 6, 7, 8,
            9, 10, 11, 12;
  Mask mask = Mask::Constant(3, 4, true);
  mask(1, 2) = false;
  const PartialTensor t = PartialTensor::matrix(values, mask, {"r1", "r2", "r3"},
                                                {"c1", "c2", "c3", "c4"});
  const PartialTensor s = shuffle_and_crop(t, 3, 4, 99);
  std::vector<double> before, after;
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      before.push_back(values(i, j));
      after.push_back(s.slice(0)(i, j));
    }
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  CHECK(before == after);
  CHECK(s.observed_count() == t.observed_count());

  // labels travel with their lines
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      const int orig_row = s.row_label(i)[1] - '1';
      const int orig_col = s.col_label(j)[1] - '1';
      CHECK(s.slice(0)(i, j) == values(orig_row, orig_col));
      CHECK(s.mask()(i, j) == mask(orig_row, orig_col));
    }
}

TEST_CASE("different seeds shuffle labels differently") {
  const Eigen::MatrixXd values = Eigen::MatrixXd::Random(12, 12);
  std::vector<std::string> labels;
  for (int k = 0; k < 12; ++k) labels.push_back("row" + std::to_string(k));
  const PartialTensor t =
      PartialTensor::matrix(values, Mask::Constant(12, 12, true), labels, {});
  const PartialTensor a = shuffle_and_crop(t, 12, 12, 1);
  const PartialTensor b = shuffle_and_crop(t, 12, 12, 2);
  CHECK(a.row_labels() != b.row_labels());
  const PartialTensor a2 = shuffle_and_crop(t, 12, 12, 1);
  CHECK(a.row_labels() == a2.row_labels());
}

TEST_CASE("cropping 568 columns down to a square submatrix") {
  const PartialTensor t = PartialTensor::matrix(Eigen::MatrixXd::Zero(600, 568),
                                                Mask::Constant(600, 568, true));
  const PartialTensor s = shuffle_and_crop(t, 289, 289, 3);
  CHECK(s.rows() == 289);
  CHECK(s.cols() == 289);
  CHECK_THROWS_AS(shuffle_and_crop(t, 601, 10, 3), std::invalid_argument);
}
