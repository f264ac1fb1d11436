#pragma once

#include <cstddef>
#include <vector>

#include "baomi/layers.hpp"

namespace baomi {

/// Logits plus the activations of the last hidden layer (the embedding that
/// gets exported for visualization).
struct ModelOutput {
  Tensor logits;
  Tensor penultimate;
};

inline constexpr std::size_t kNumClasses = 2;

struct FcnConfig {
  std::size_t hidden_units = 256;
};

// dense(hidden) + ReLU -> dense(2)
struct FcnParams {
  Linear hidden;
  Linear out;

  static FcnParams init(std::size_t input_dim, const FcnConfig& cfg, Rng& rng);
  std::size_t input_dim() const { return hidden.in_features(); }
  std::vector<NamedTensor> parameters() const;
};

ModelOutput fcn_forward(const FcnParams& params, const Tensor& x);

struct CnnConfig {
  ConvStackConfig convs;
  std::size_t dense_units = 128;
};

// conv stack -> flatten -> dense(128) + ReLU -> dense(2)
struct CnnParams {
  ConvStack convs;
  Linear dense;
  Linear out;

  static CnnParams init(std::size_t input_dim, const CnnConfig& cfg, Rng& rng);
  std::vector<NamedTensor> parameters() const;
};

ModelOutput cnn_forward(const CnnParams& params, const Tensor& x);

std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named);

}  // namespace baomi
