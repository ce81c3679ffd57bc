#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "doctest.h"
#include "tensor/ops.hpp"
#include "test_helpers.hpp"

using namespace ccan;
using ccan::testing::random_tensor;

TEST_SUITE("tensor") {

TEST_CASE("tensor construction enforces the shape contract") {
  CHECK_THROWS_AS(Tensor<float>({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor<float>({0, 2}, {}), DimensionError);
  Tensor<float> t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6);
}

TEST_CASE("matmul examples") {
  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> m({2, 2}, {1, 2, 3, 4});
  auto r = matmul(eye, m);
  CHECK(std::vector<double>(r.data().begin(), r.data().end()) == std::vector<double>{1, 2, 3, 4});

  auto dot = matmul(Tensor<double>({1, 2}, {1, 2}), Tensor<double>({2, 1}, {3, 4}));
  CHECK(dot.item() == 11);

  try {
    matmul(Tensor<double>({2, 3}, std::vector<double>(6)), Tensor<double>({2, 3}, std::vector<double>(6)));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum(A B) is ones * B^T") {
  Rng rng(3);
  auto a = random_tensor<double>(3, 4, rng);
  auto b = random_tensor<double>(4, 2, rng, 1.0, false);
  sum(matmul(a, b)).backward();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) {
      const double expected = b.at(k, 0) + b.at(k, 1);
      CHECK(a.grad()[i * 4 + k] == doctest::Approx(expected).epsilon(1e-12));
    }
  NamedTensors<double> params{{"a", a}};
  auto report = grad_check<double>([&] { return sum(matmul(a, b)); }, params, {1e-4, 0});
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("softmax examples") {
  auto u = softmax(Tensor<double>({1, 3}, {0, 0, 0}));
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0));

  auto big = softmax(Tensor<float>({1, 2}, {1000, 1000}));
  CHECK(big.data()[0] == doctest::Approx(0.5));
  CHECK(big.data()[1] == doctest::Approx(0.5));

  auto closed = softmax(Tensor<double>({1, 2}, {0, std::log(3.0)}));
  CHECK(closed.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(closed.data()[1] == doctest::Approx(0.75).epsilon(1e-12));

  CHECK_THROWS_AS(softmax(Tensor<double>({1, 2}, {0, std::nan("")})), NumericError);
}

TEST_CASE("softmax along columns") {
  auto s = softmax(Tensor<double>({2, 2}, {0, 1, 0, 1}), 0);
  CHECK(s.at(0, 0) == doctest::Approx(0.5));
  CHECK(s.at(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("softmax rows are stochastic for arbitrary finite inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.index(6), cols = 1 + rng.index(9);
    auto x = random_tensor<float>(rows, cols, rng, 30.0, false);
    auto y = softmax(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        CHECK(y.at(r, c) >= 0.0f);
        total += y.at(r, c);
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("layer_norm examples") {
  auto ones = Tensor<double>::full({1, 3}, 1.0);
  auto zeros = Tensor<double>::zeros({1, 3});
  auto c = layer_norm(Tensor<double>({1, 3}, {5, 5, 5}), ones, zeros);
  for (double v : c.data()) CHECK(v == 0.0);

  auto g2 = Tensor<double>::full({1, 2}, 1.0);
  auto b2 = Tensor<double>::zeros({1, 2});
  auto n = layer_norm(Tensor<double>({1, 2}, {1, -1}), g2, b2, 0.0);
  CHECK(n.data()[0] == doctest::Approx(1.0));
  CHECK(n.data()[1] == doctest::Approx(-1.0));
}

TEST_CASE("gelu examples") {
  auto g = gelu(Tensor<double>({1, 3}, {0, 10, -10}));
  CHECK(g.data()[0] == 0.0);
  CHECK(g.data()[1] == doctest::Approx(10.0));
  CHECK(std::abs(g.data()[2]) < 1e-12);
}

TEST_CASE("backward examples") {
  Tensor<double> x({1, 3}, {4, 5, 6}, true);
  sum(x).backward();
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 1, 1});

  Tensor<double> y({1, 2}, {1, 2}, true);
  sum(mul(y, y)).backward();
  CHECK(y.grad()[0] == 2.0);
  CHECK(y.grad()[1] == 4.0);

  CHECK_THROWS_AS(x.backward(), UsageError);
}

TEST_CASE("repeated backward accumulates into leaves") {
  Tensor<double> x({1, 2}, {1, 2}, true);
  auto loss = sum(scale(x, 3.0));
  loss.backward();
  loss.backward();
  CHECK(x.grad()[0] == 6.0);
  x.zero_grad();
  loss.backward();
  CHECK(x.grad()[0] == 3.0);
}

TEST_CASE("a tensor used twice receives the sum of both path gradients") {
  Rng rng(5);
  auto x = random_tensor<double>(2, 3, rng);
  auto w = random_tensor<double>(3, 3, rng, 1.0, false);
  // Shared use: loss = sum(gelu(x W) ⊙ x).
  sum(mul(gelu(matmul(x, w)), x)).backward();
  std::vector<double> shared(x.grad().begin(), x.grad().end());

  // Decomposed: the two uses as separate leaves with identical values.
  auto x1 = x.detach();
  auto x2 = x.detach();
  Tensor<double> a(x1.shape(), std::vector<double>(x1.data().begin(), x1.data().end()), true);
  Tensor<double> b(x2.shape(), std::vector<double>(x2.data().begin(), x2.data().end()), true);
  sum(mul(gelu(matmul(a, w)), b)).backward();
  for (std::size_t i = 0; i < shared.size(); ++i) {
    CHECK(shared[i] == doctest::Approx(a.grad()[i] + b.grad()[i]).epsilon(1e-12));
  }
}

TEST_CASE("no-grad guard skips graph recording") {
  Tensor<double> x({1, 2}, {1, 2}, true);
  NoGradGuard guard;
  auto y = scale(x, 2.0);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("grad_check examples") {
  Rng rng(1);
  auto x = random_tensor<double>(1, 5, rng);
  NamedTensors<double> params{{"x", x}};
  auto report = grad_check<double>([&] { return sum(mul(x, x)); }, params, {1e-3, 0});
  CHECK(report.max_rel_err < 1e-6);
  REQUIRE(report.per_parameter.size() == 1);
  CHECK(report.per_parameter[0].name == "x");

  CHECK_THROWS_AS(grad_check<double>([&] { return sum(x); }, params, {0.0, 0}), UsageError);

  // Corrupted analytic gradient is detected.
  auto loss = [&] { return sum(mul(x, x)); };
  auto analytic = analytic_gradients<double>(loss, params);
  auto numeric = numeric_gradients<double>(loss, params, {1e-3, 0});
  analytic[0][2] = analytic[0][2] * 1.5 + 1.0;
  CHECK(compare_gradients({"x"}, analytic, numeric).max_rel_err > 0.1);
}

TEST_CASE("grad_check rejects a non-deterministic loss") {
  Rng rng(2);
  auto x = random_tensor<double>(1, 3, rng);
  NamedTensors<double> params{{"x", x}};
  int calls = 0;
  auto noisy = [&] { return scale(sum(x), 1.0 + 0.1 * (calls++)); };
  CHECK_THROWS_AS(grad_check<double>(noisy, params, {1e-3, 0}), UsageError);
}

TEST_CASE("finite differences agree with analytic gradients for every op") {
  // eps = 1e-3 central differences, 20 seeds per op.
  using Fn = std::function<Tensor<double>(const Tensor<double>&, const Tensor<double>&)>;
  const std::vector<std::pair<const char*, Fn>> cases = {
      {"matmul", [](auto& a, auto& b) { return matmul(a, b); }},
      {"matmul_transposed", [](auto& a, auto& b) { return matmul_transposed(a, b); }},
      {"add", [](auto& a, auto& b) { return add(a, slice_rows(matmul(b, Tensor<double>::full({4, 4}, 0.5)), 1, 4)); }},
      {"mul", [](auto& a, auto& b) { return mul(a, slice_rows(matmul(b, Tensor<double>::full({4, 4}, 0.3)), 0, 3)); }},
      {"add_bias", [](auto& a, auto& b) { return add_bias(a, slice_rows(b, 0, 1)); }},
      {"softmax", [](auto& a, auto& b) { return matmul(softmax(a), b); }},
      {"softmax_axis0", [](auto& a, auto& b) { return matmul(softmax(a, 0), b); }},
      {"layer_norm", [](auto& a, auto& b) { return layer_norm(a, slice_rows(b, 0, 1), slice_rows(b, 1, 2)); }},
      {"gelu", [](auto& a, auto& b) { return matmul(gelu(a), b); }},
      {"sigmoid", [](auto& a, auto& b) { return matmul(sigmoid(a), b); }},
      {"concat_rows", [](auto& a, auto& b) { return matmul(concat_rows<double>({a, a}), b); }},
      {"concat_cols", [](auto& a, auto& b) { return matmul_transposed(concat_cols<double>({a, a}), concat_cols<double>({b, b})); }},
      {"slice_cols", [](auto& a, auto& b) { return matmul(slice_cols(a, 1, 3), slice_rows(b, 0, 2)); }},
      {"gather_rows", [](auto& a, auto& b) {
         const std::size_t idx[] = {2, 0, 2};
         return matmul(gather_rows(a, std::span<const std::size_t>(idx)), b);
       }},
      {"mean_rows", [](auto& a, auto& b) { return matmul(mean_rows(a), b); }},
      {"max_rows", [](auto& a, auto& b) { return matmul(max_rows(a), b); }},
      {"group_mean_rows", [](auto& a, auto& b) { return group_mean_rows(b, 2); }},
      {"bce", [](auto& a, auto& b) {
         const double t[] = {1, 0, 1, 0};
         return bce(sigmoid(matmul(slice_rows(a, 0, 1), b)), std::span<const double>(t));
       }},
  };
  for (const auto& [name, fn] : cases) {
    const std::string op = name;
    CAPTURE(op);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(100 + seed);
      auto a = random_tensor<double>(3, 4, rng, 0.5);
      auto b = random_tensor<double>(4, 4, rng, 0.5);
      auto w = random_tensor<double>(1, 1, rng, 1.0, false);
      NamedTensors<double> params{{"a", a}, {"b", b}};
      auto loss = [&] {
        auto y = fn(a, b);
        // Random linear functional keeps every output coordinate in play.
        std::vector<double> coeffs(y.numel());
        Rng c(7);
        for (double& v : coeffs) v = c.normal();
        return sum(mul(y, Tensor<double>(y.shape(), coeffs)));
      };
      worst = std::max(worst, grad_check<double>(loss, params, {1e-3, 0}).max_rel_err);
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("probes count matmul work and live tensor bytes") {
  MacProbe macs;
  MemoryProbe memory;
  {
    auto a = Tensor<float>::zeros({4, 5});
    auto b = Tensor<float>::zeros({5, 6});
    auto c = matmul(a, b);
    matmul_transposed(c, Tensor<float>::zeros({2, 6}));
  }
  CHECK(macs.count() == 4 * 5 * 6 + 4 * 6 * 2);
  CHECK(memory.peak_bytes() >= (20 + 30 + 24) * sizeof(float));
}

}  // TEST_SUITE
