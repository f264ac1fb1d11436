#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "baomi/rng.hpp"
#include "baomi/tensor.hpp"

namespace baomi {

/// A parameter tensor with a stable, checkpoint-facing name.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor forward(const Tensor& x) const;  // [batch x in] -> [batch x out]
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct Conv1dLayer {
  Tensor kernels;  // [out x in x 3]
  Tensor bias;     // [out]

  static Conv1dLayer init(std::size_t in_channels, std::size_t out_channels, Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct ConvStackConfig {
  std::size_t conv1_filters = 64;
  std::size_t conv2_filters = 128;
};

/// conv -> ReLU -> pool2 -> conv -> ReLU -> pool2 over a one-channel input.
struct ConvStack {
  Conv1dLayer conv1;
  Conv1dLayer conv2;

  static ConvStack init(const ConvStackConfig& cfg, Rng& rng);
  std::size_t out_channels() const { return conv2.kernels.dim(0); }
  // [batch x d] -> [batch x channels x floor(floor(d/2)/2)]
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// Length after both pools; throws ShapeError when d < 4.
std::size_t pooled_length(std::size_t input_dim);

}  // namespace baomi
