#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "baomi/ops.hpp"
#include "baomi/rng.hpp"
#include "support/oracles.hpp"

using namespace baomi;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

void check_close(std::span<const double> got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= tol);
}

}  // namespace

TEST_CASE("matmul") {
  SUBCASE("identity") {
    const auto c = ops::matmul(Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::from({2, 2}, {3, 4, 5, 6}));
    check_close(c.data(), {3, 4, 5, 6}, 0.0);
  }
  SUBCASE("row times column") {
    const auto c = ops::matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
    CHECK(c.shape() == Shape{1, 1});
    CHECK(c.data()[0] == 11.0);
  }
  SUBCASE("random 3x4 by 4x2 against triple loop") {
    Rng rng(11);
    const auto a = random_values(rng, 12), b = random_values(rng, 8);
    const auto c = ops::matmul(Tensor::from({3, 4}, a), Tensor::from({4, 2}, b));
    check_close(c.data(), oracle::matmul(a, b, 3, 4, 2), 1e-12);
  }
  SUBCASE("mismatch names both shapes") {
    try {
      (void)ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string what = e.what();
      CHECK(what.find("[2x3]") != std::string::npos);
      CHECK(what.find("by [2x3]") != std::string::npos);
    }
  }
}

TEST_CASE("bmm matches per-batch matmul") {
  Rng rng(5);
  const auto a = random_values(rng, 2 * 3 * 4), b = random_values(rng, 2 * 4 * 5);
  const auto c = ops::bmm(Tensor::from({2, 3, 4}, a), Tensor::from({2, 4, 5}, b));
  for (std::size_t k = 0; k < 2; ++k) {
    const std::vector<double> ak(a.begin() + k * 12, a.begin() + (k + 1) * 12);
    const std::vector<double> bk(b.begin() + k * 20, b.begin() + (k + 1) * 20);
    const auto want = oracle::matmul(ak, bk, 3, 4, 5);
    for (std::size_t i = 0; i < 15; ++i) CHECK(std::abs(c.data()[k * 15 + i] - want[i]) < 1e-12);
  }
}

TEST_CASE("conv1d") {
  SUBCASE("zero input, zero bias") {
    Rng rng(1);
    const auto y = ops::conv1d(Tensor::zeros({2, 6}), Tensor::from({3, 2, 3}, random_values(rng, 18)),
                               Tensor::zeros({3}));
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("identity kernel") {
    const auto y = ops::conv1d(Tensor::from({1, 4}, {1, 2, 3, 4}), Tensor::from({1, 1, 3}, {0, 1, 0}),
                               Tensor::zeros({1}));
    check_close(y.data(), {1, 2, 3, 4}, 0.0);
  }
  SUBCASE("random 2x8 input, 3x2x3 kernels against sliding window") {
    Rng rng(2);
    const auto x = random_values(rng, 16), w = random_values(rng, 18), b = random_values(rng, 3);
    const auto y = ops::conv1d(Tensor::from({2, 8}, x), Tensor::from({3, 2, 3}, w), Tensor::from({3}, b));
    check_close(y.data(), oracle::conv1d(x, w, b, 2, 3, 8), 1e-12);
  }
  SUBCASE("batched input is per-example") {
    Rng rng(3);
    const auto x = random_values(rng, 2 * 2 * 5), w = random_values(rng, 12), b = random_values(rng, 2);
    const auto y = ops::conv1d(Tensor::from({2, 2, 5}, x), Tensor::from({2, 2, 3}, w), Tensor::from({2}, b));
    for (std::size_t k = 0; k < 2; ++k) {
      const std::vector<double> xk(x.begin() + k * 10, x.begin() + (k + 1) * 10);
      const auto want = oracle::conv1d(xk, w, b, 2, 2, 5);
      for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(y.data()[k * 10 + i] - want[i]) < 1e-12);
    }
  }
  SUBCASE("channel mismatch") {
    CHECK_THROWS_AS(ops::conv1d(Tensor::zeros({2, 5}), Tensor::zeros({1, 3, 3}), Tensor::zeros({1})),
                    ShapeError);
  }
}

TEST_CASE("maxpool1d") {
  SUBCASE("basic") {
    check_close(ops::maxpool1d(Tensor::from({1, 4}, {1, 3, 2, 5})).data(), {3, 5}, 0.0);
  }
  SUBCASE("ties route the gradient to the first element") {
    Tensor x = Tensor::from({1, 4}, {7, 7, 1, 1}, true);
    const auto y = ops::maxpool1d(x);
    check_close(y.data(), {7, 1}, 0.0);
    ops::sum(y).backward();
    check_close(x.grad(), {1, 0, 1, 0}, 0.0);
  }
  SUBCASE("odd trailing element dropped") {
    const auto y = ops::maxpool1d(Tensor::from({1, 5}, {1, 2, 3, 4, 99}));
    CHECK(y.shape() == Shape{1, 2});
    check_close(y.data(), {2, 4}, 0.0);
  }
  SUBCASE("random 4x10 against direct scan") {
    Rng rng(4);
    const auto x = random_values(rng, 40);
    check_close(ops::maxpool1d(Tensor::from({4, 10}, x)).data(), oracle::maxpool(x, 4, 10), 0.0);
  }
  SUBCASE("length below two") {
    CHECK_THROWS_AS(ops::maxpool1d(Tensor::zeros({3, 1})), ShapeError);
  }
}

TEST_CASE("softmax") {
  SUBCASE("uniform") {
    check_close(ops::softmax(Tensor::zeros({4})).data(), {0.25, 0.25, 0.25, 0.25}, 1e-15);
  }
  SUBCASE("large logits do not overflow") {
    const auto y = ops::softmax(Tensor::from({2}, {1000, 0}));
    CHECK(std::isfinite(y.data()[0]));
    CHECK(y.data()[0] == doctest::Approx(1.0));
    CHECK(y.data()[1] >= 0.0);
    CHECK(y.data()[1] < 1e-300);
  }
  SUBCASE("1,2,3") {
    check_close(ops::softmax(Tensor::from({3}, {1, 2, 3})).data(),
                oracle::softmax({1, 2, 3}, 1, 3), 1e-15);
    const auto y = ops::softmax(Tensor::from({3}, {1, 2, 3}));
    CHECK(y.data()[0] == doctest::Approx(0.09003).epsilon(1e-4));
    CHECK(y.data()[1] == doctest::Approx(0.24473).epsilon(1e-4));
    CHECK(y.data()[2] == doctest::Approx(0.66524).epsilon(1e-4));
  }
  SUBCASE("NaN rejected") {
    CHECK_THROWS_AS(ops::softmax(Tensor::from({2}, {0, std::numeric_limits<double>::quiet_NaN()})),
                    std::domain_error);
  }
}

TEST_CASE("cross_entropy") {
  const std::vector<std::size_t> zero{0}, one{1};
  CHECK(ops::cross_entropy(Tensor::from({1, 2}, {10, -10}), zero).item() < 1e-8);
  CHECK(ops::cross_entropy(Tensor::from({1, 2}, {0, 0}), one).item() ==
        doctest::Approx(std::log(2.0)));
  SUBCASE("random 4x2 batch") {
    Rng rng(9);
    const auto logits = random_values(rng, 8);
    const std::vector<std::size_t> labels{0, 1, 1, 0};
    CHECK(std::abs(ops::cross_entropy(Tensor::from({4, 2}, logits), labels).item() -
                   oracle::cross_entropy(logits, labels, 2)) < 1e-10);
  }
  SUBCASE("label out of range") {
    const std::vector<std::size_t> bad{2};
    CHECK_THROWS_AS(ops::cross_entropy(Tensor::zeros({1, 2}), bad), std::out_of_range);
  }
}

TEST_CASE("elementwise and shape ops") {
  const auto a = Tensor::from({2, 2}, {1, -2, 3, -4});
  const auto b = Tensor::from({2, 2}, {2, 2, 2, 2});
  check_close(ops::add(a, b).data(), {3, 0, 5, -2}, 0.0);
  check_close(ops::mul(a, b).data(), {2, -4, 6, -8}, 0.0);
  check_close(ops::relu(a).data(), {1, 0, 3, 0}, 0.0);
  check_close(ops::transpose_last2(a).data(), {1, 3, -2, -4}, 0.0);
  check_close(ops::add_bias(a, Tensor::from({2}, {10, 20})).data(), {11, 18, 13, 16}, 0.0);
  check_close(ops::mean_over(a, 0).data(), {2, -3}, 0.0);
  check_close(ops::mean_over(a, 1).data(), {-0.5, -0.5}, 0.0);
  const auto c = ops::concat_columns(a, Tensor::from({2, 1}, {9, 8}));
  CHECK(c.shape() == Shape{2, 3});
  check_close(c.data(), {1, -2, 9, 3, -4, 8}, 0.0);
  CHECK(ops::reshape(a, {4}).shape() == Shape{4});
  CHECK_THROWS_AS(ops::reshape(a, {3}), ShapeError);
  CHECK_THROWS_AS(ops::add(a, Tensor::zeros({4})), ShapeError);
}
