#include "baomi/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace baomi {

AdamState::AdamState(AdamOptions opts, std::span<const Tensor> params)
    : options(opts) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Tensor& p : params) {
    first_moment.emplace_back(p.numel(), 0.0);
    second_moment.emplace_back(p.numel(), 0.0);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw std::logic_error("adam_step: state tracks " +
                           std::to_string(state.first_moment.size()) +
                           " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::logic_error("adam_step: parameter " + std::to_string(i) +
                             " has no gradient");
    }
    if (params[i].numel() != state.first_moment[i].size()) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) +
                       " changed size since the state was created");
    }
  }

  ++state.step_count;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_data();
    auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * grad[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace baomi
