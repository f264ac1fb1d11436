#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "baomi/tensor.hpp"

namespace baomi {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment estimates for one parameter list; indices follow the order the
/// parameters were passed to the constructor.
struct AdamState {
  AdamOptions options;
  std::size_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  AdamState() = default;
  AdamState(AdamOptions opts, std::span<const Tensor> params);
};

// One bias-corrected Adam update of every parameter in place. Throws
// std::logic_error if a parameter has no gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

void zero_grads(std::span<Tensor> params);

}  // namespace baomi
