#include "baomi/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace baomi {

const char* direction_name(Direction d) {
  return d == Direction::a_to_b ? "a_to_b" : "b_to_a";
}

BanditState BanditState::initial(std::size_t n_heads) {
  if (n_heads == 0) throw std::invalid_argument("bandit needs at least one head");
  BanditState state;
  state.q_values = {std::vector<double>(n_heads, 0.0), std::vector<double>(n_heads, 0.0)};
  return state;
}

std::vector<double> softmax_weights(std::span<const double> q_values) {
  if (q_values.empty()) return {};
  const double peak = *std::max_element(q_values.begin(), q_values.end());
  std::vector<double> w(q_values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = std::exp(q_values[i] - peak));
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> head_weights(const BanditState& state, Direction direction) {
  return softmax_weights(state.q_values[index_of(direction)]);
}

PerDirection all_head_weights(const BanditState& state) {
  return {head_weights(state, Direction::a_to_b), head_weights(state, Direction::b_to_a)};
}

PerDirection uniform_head_weights(std::size_t n_heads) {
  const std::vector<double> w(n_heads, 1.0 / static_cast<double>(n_heads));
  return {w, w};
}

std::vector<double> compute_rewards(std::span<const double> losses_without_head,
                                    double loss_full, double eps) {
  auto check = [](double loss) {
    if (!std::isfinite(loss) || loss < 0.0) {
      throw std::domain_error("compute_rewards: loss " + std::to_string(loss) +
                              " is not finite and non-negative");
    }
  };
  check(loss_full);
  if (!(eps > 0.0)) throw std::domain_error("compute_rewards: eps must be positive");
  std::vector<double> reduction(losses_without_head.size());
  double total = 0.0;
  for (std::size_t h = 0; h < reduction.size(); ++h) {
    check(losses_without_head[h]);
    reduction[h] = std::max(0.0, losses_without_head[h] - loss_full);
    total += reduction[h];
  }
  for (double& r : reduction) r /= total + eps;
  return reduction;
}

void update_q(BanditState& state, const PerDirection& rewards, double gamma) {
  for (Direction d : kDirections) {
    auto& q = state.q_values[index_of(d)];
    const auto& r = rewards[index_of(d)];
    if (r.size() != q.size()) {
      throw std::invalid_argument("update_q: " + std::to_string(r.size()) + " rewards for " +
                                  std::to_string(q.size()) + " heads");
    }
    for (std::size_t h = 0; h < q.size(); ++h) q[h] = gamma * q[h] + (1.0 - gamma) * r[h];
  }
  ++state.update_count;
}

}  // namespace baomi
