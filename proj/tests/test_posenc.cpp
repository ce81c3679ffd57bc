#include <cmath>
#include <set>

#include "common/error.hpp"
#include "doctest.h"
#include "posenc/posenc.hpp"
#include "test_helpers.hpp"

using namespace ccan;

namespace {

void check_close(const std::vector<float>& got, const std::vector<double>& want, double tol = 1e-6) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CAPTURE(i);
    CHECK(std::abs(got[i] - want[i]) < tol);
  }
}

}  // namespace

TEST_SUITE("posenc") {

TEST_CASE("frequency ladder examples") {
  CHECK(frequency_ladder(2, 10).frequencies == std::vector<double>{1, 10});
  CHECK(frequency_ladder(1, 5).frequencies == std::vector<double>{1});
  const auto six = frequency_ladder(6, 10).frequencies;
  const std::vector<double> want{1, 2.8, 4.6, 6.4, 8.2, 10};
  REQUIRE(six.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(six[i] == doctest::Approx(want[i]).epsilon(1e-12));
  for (std::size_t i = 2; i < 6; ++i) CHECK(std::abs((six[i] - six[i - 1]) - (six[1] - six[0])) < 1e-9);
  CHECK(six.front() == 1.0);
  CHECK(six.back() == 10.0);
}

TEST_CASE("frequency ladder rejects bad arguments") {
  CHECK_THROWS_AS(frequency_ladder(0, 10), ConfigError);
  CHECK_THROWS_AS(frequency_ladder(3, 0.5), ConfigError);
}

TEST_CASE("normalize_coord anchors corners and centers") {
  CHECK(normalize_coord({0, 0, 4, 4}) == std::pair<double, double>{-1, -1});
  CHECK(normalize_coord({3, 3, 4, 4}) == std::pair<double, double>{1, 1});
  CHECK(normalize_coord({1, 2, 3, 5}) == std::pair<double, double>{0, 0});
  CHECK(normalize_coord({0, 0, 1, 1}) == std::pair<double, double>{0, 0});
}

TEST_CASE("encode_position examples") {
  const auto one = frequency_ladder(1, 1);
  check_close(encode_position({1, 1, 3, 3}, one), {0, 1, 0, 1});
  // x = 1 (last column), y = -1 (first row)
  check_close(encode_position({0, 2, 3, 3}, one), {0, -1, 0, -1});
  // x = 0.5 on a 5-column grid, y = 0
  const auto enc = encode_position({1, 3, 3, 5}, frequency_ladder(2, 10));
  check_close(std::vector<float>(enc.begin(), enc.begin() + 4), {1, 0, 0, -1});
  CHECK(enc.size() == 8);
}

TEST_CASE("raw coordinates are appended only when requested") {
  const auto ladder = frequency_ladder(2, 10);
  CHECK(encoding_width(ladder) == 8);
  CHECK(encoding_width(ladder, true) == 10);
  const auto enc = encode_position({0, 4, 3, 5}, ladder, true);
  REQUIRE(enc.size() == 10);
  CHECK(enc[8] == 1.0f);
  CHECK(enc[9] == -1.0f);
}

TEST_CASE("attach_encodings examples") {
  const auto one = frequency_ladder(1, 1);
  const std::vector<GridCoord> center{{1, 1, 3, 3}};
  const Matrix out = attach_encodings(Matrix(1, 2, std::vector<float>{5, 7}), center, one);
  check_close(out.values, {5, 7, 0, 1, 0, 1});

  const Matrix empty = attach_encodings(Matrix(0, 3), {}, one);
  CHECK(empty.rows == 0);
  CHECK(empty.cols == 7);

  CHECK_THROWS_AS(attach_encodings(Matrix(2, 3), center, one), DataError);
}

TEST_CASE("attach_encodings keeps the token prefix bit for bit") {
  Rng rng(3);
  const auto ladder = frequency_ladder(6, 10);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureBag bag = testing::random_bag(20, 9, 8, 8, rng);
    const Matrix out = attach_encodings(bag.tokens, bag.coords, ladder);
    REQUIRE(out.cols == 9 + 24);
    for (std::size_t r = 0; r < out.rows; ++r) {
      for (std::size_t c = 0; c < 9; ++c) CHECK(out(r, c) == bag.tokens(r, c));
    }
  }
}

TEST_CASE("encodings are bounded and distinct across a 32x32 grid") {
  const auto ladder = frequency_ladder(6, 10);
  std::set<std::vector<float>> seen;
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 32; ++c) {
      const auto enc = encode_position({r, c, 32, 32}, ladder);
      for (float v : enc) CHECK((v >= -1.0f && v <= 1.0f));
      seen.insert(enc);
    }
  }
  CHECK(seen.size() == 32 * 32);
}

}
