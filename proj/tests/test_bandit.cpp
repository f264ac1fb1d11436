#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <limits>
#include <vector>

#include "baomi/bandit.hpp"

using namespace baomi;

TEST_CASE("initial state") {
  const BanditState s = BanditState::initial(4);
  CHECK(s.n_heads() == 4);
  CHECK(s.update_count == 0);
  CHECK_FALSE(s.last_loss.has_value());
  for (const auto& bank : s.q_values)
    for (double q : bank) CHECK(q == 0.0);
}

TEST_CASE("head weights") {
  SUBCASE("zero Q is uniform") {
    for (double w : softmax_weights(std::vector<double>{0, 0, 0, 0})) CHECK(w == 0.25);
  }
  SUBCASE("one raised head") {
    const auto w = softmax_weights(std::vector<double>{1, 0, 0, 0});
    const double e = std::exp(1.0);
    CHECK(w[0] == doctest::Approx(e / (e + 3)).epsilon(1e-14));
    CHECK(w[1] == doctest::Approx(1 / (e + 3)).epsilon(1e-14));
    CHECK(w[0] == doctest::Approx(0.4754).epsilon(1e-4));
    CHECK(w[3] == doctest::Approx(0.1749).epsilon(1e-3));
  }
  SUBCASE("shift invariance") {
    const std::vector<double> q{0.3, -1.2, 2.0, 0.0};
    std::vector<double> shifted = q;
    for (double& v : shifted) v += 17.5;
    const auto a = softmax_weights(q), b = softmax_weights(shifted);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-15);
  }
  SUBCASE("large values stay finite") {
    const auto w = softmax_weights(std::vector<double>{800, 799});
    CHECK(std::isfinite(w[0]));
    CHECK(w[0] + w[1] == doctest::Approx(1.0));
  }
  SUBCASE("per-direction") {
    BanditState s = BanditState::initial(2);
    s.q_values[1] = {1.0, 0.0};
    CHECK(head_weights(s, Direction::a_to_b)[0] == 0.5);
    CHECK(head_weights(s, Direction::b_to_a)[0] > 0.7);
    const auto u = uniform_head_weights(4);
    CHECK(u[0] == std::vector<double>(4, 0.25));
    CHECK(u[1] == std::vector<double>(4, 0.25));
  }
}

TEST_CASE("compute_rewards") {
  SUBCASE("proportional split") {
    // L_full = 1, masked losses give dL = 0.3, 0.1, 0, 0
    const auto r = compute_rewards(std::vector<double>{1.3, 1.1, 1.0, 1.0}, 1.0, 1e-8);
    CHECK(r[0] == doctest::Approx(0.75).epsilon(1e-7));
    CHECK(r[1] == doctest::Approx(0.25).epsilon(1e-7));
    CHECK(r[2] == 0.0);
    CHECK(r[3] == 0.0);
  }
  SUBCASE("all zero") {
    for (double v : compute_rewards(std::vector<double>{2, 2, 2}, 2.0, 1e-8)) CHECK(v == 0.0);
  }
  SUBCASE("negative deltas clamp") {
    const auto r = compute_rewards(std::vector<double>{0.5, 1.5}, 1.0, 1e-8);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(r[1] < 1.0);
  }
  SUBCASE("invariant to a shared offset") {
    const std::vector<double> masked{0.9, 1.4, 1.2, 0.7};
    std::vector<double> shifted = masked;
    for (double& v : shifted) v += 3.0;
    const auto a = compute_rewards(masked, 1.0, 1e-8), b = compute_rewards(shifted, 4.0, 1e-8);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  }
  SUBCASE("bad losses") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(compute_rewards(std::vector<double>{nan, 1}, 1.0, 1e-8), std::domain_error);
    CHECK_THROWS_AS(compute_rewards(std::vector<double>{1, 1}, inf, 1e-8), std::domain_error);
    CHECK_THROWS_AS(compute_rewards(std::vector<double>{-1, 1}, 1.0, 1e-8), std::domain_error);
  }
}

TEST_CASE("update_q") {
  SUBCASE("single step") {
    BanditState s = BanditState::initial(1);
    s.q_values = {std::vector<double>{0.5}, std::vector<double>{0.5}};
    update_q(s, {std::vector<double>{1.0}, std::vector<double>{0.0}}, 0.9);
    CHECK(s.q_values[0][0] == doctest::Approx(0.55).epsilon(1e-15));
    CHECK(s.q_values[1][0] == doctest::Approx(0.45).epsilon(1e-15));
    CHECK(s.update_count == 1);
  }
  SUBCASE("geometric decay under zero reward") {
    BanditState s = BanditState::initial(2);
    s.q_values = {std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 1.0}};
    for (int t = 1; t <= 30; ++t) {
      update_q(s, {std::vector<double>{0, 0}, std::vector<double>{0, 0}}, 0.9);
      CHECK(std::abs(s.q_values[0][0] - std::pow(0.9, t)) < 1e-12);
    }
  }
  SUBCASE("constant reward closed form") {
    for (double gamma : {0.5, 0.9, 0.99}) {
      BanditState s = BanditState::initial(3);
      const double r = 0.37;
      for (int t = 1; t <= 200; ++t) {
        update_q(s, {std::vector<double>(3, r), std::vector<double>(3, r)}, gamma);
        CHECK(std::abs(s.q_values[1][2] - r * (1 - std::pow(gamma, t))) < 1e-12);
      }
    }
  }
}
