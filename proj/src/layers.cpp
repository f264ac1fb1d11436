#include "baomi/layers.hpp"

#include <cmath>

#include "baomi/ops.hpp"

namespace baomi {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(element_count(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  return {glorot_uniform({in, out}, in, out, rng), Tensor::zeros({out}, true)};
}

Tensor Linear::forward(const Tensor& x) const {
  return ops::add_bias(ops::matmul(x, weight), bias);
}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Conv1dLayer Conv1dLayer::init(std::size_t in_channels, std::size_t out_channels, Rng& rng) {
  return {glorot_uniform({out_channels, in_channels, 3}, in_channels * 3, out_channels * 3, rng),
          Tensor::zeros({out_channels}, true)};
}

Tensor Conv1dLayer::forward(const Tensor& x) const { return ops::conv1d(x, kernels, bias); }

void Conv1dLayer::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".kernels", kernels});
  out.push_back({prefix + ".bias", bias});
}

ConvStack ConvStack::init(const ConvStackConfig& cfg, Rng& rng) {
  ConvStack stack;
  stack.conv1 = Conv1dLayer::init(1, cfg.conv1_filters, rng);
  stack.conv2 = Conv1dLayer::init(cfg.conv1_filters, cfg.conv2_filters, rng);
  return stack;
}

std::size_t pooled_length(std::size_t input_dim) {
  if (input_dim < 4) {
    throw ShapeError("input dimension " + std::to_string(input_dim) +
                     " too short for two pooling stages (need >= 4)");
  }
  return input_dim / 2 / 2;
}

Tensor ConvStack::forward(const Tensor& x) const {
  if (x.rank() != 2) throw ShapeError("conv stack expects [batch x d], got " + to_string(x.shape()));
  pooled_length(x.dim(1));
  Tensor h = ops::reshape(x, {x.dim(0), 1, x.dim(1)});
  h = ops::maxpool1d(ops::relu(conv1.forward(h)));
  h = ops::maxpool1d(ops::relu(conv2.forward(h)));
  return h;
}

void ConvStack::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
}

}  // namespace baomi
