#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace baomi {

// Attention flow: queries from one branch, keys/values from the other.
enum class Direction : std::size_t { a_to_b = 0, b_to_a = 1 };
inline constexpr std::array<Direction, 2> kDirections = {Direction::a_to_b, Direction::b_to_a};
inline std::size_t index_of(Direction d) { return static_cast<std::size_t>(d); }
const char* direction_name(Direction d);

// One weight (or reward, or loss) per head, for each direction.
using PerDirection = std::array<std::vector<double>, 2>;

/// Running value estimate per attention head, one bank per direction. The
/// head weights used in fusion are the softmax of these values.
struct BanditState {
  PerDirection q_values;
  std::optional<double> last_loss;
  std::size_t update_count = 0;

  static BanditState initial(std::size_t n_heads);
  std::size_t n_heads() const { return q_values[0].size(); }
};

// exp(q_h) / sum exp(q_h'), with max subtraction.
std::vector<double> softmax_weights(std::span<const double> q_values);
std::vector<double> head_weights(const BanditState& state, Direction direction);
PerDirection all_head_weights(const BanditState& state);
PerDirection uniform_head_weights(std::size_t n_heads);

// R_h = max(0, L_without_h - L_full) / (sum_h' max(0, ...) + eps).
// Throws std::domain_error on non-finite or negative losses.
std::vector<double> compute_rewards(std::span<const double> losses_without_head,
                                    double loss_full, double eps);

// Q <- gamma Q + (1 - gamma) R for every head and direction.
void update_q(BanditState& state, const PerDirection& rewards, double gamma);

}  // namespace baomi
