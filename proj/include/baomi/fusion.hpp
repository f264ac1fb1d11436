#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "baomi/bandit.hpp"
#include "baomi/layers.hpp"
#include "baomi/models.hpp"

namespace baomi {

struct FusionConfig {
  std::size_t n_heads = 4;
  std::size_t head_dim = 32;
  ConvStackConfig convs;  // conv2_filters is the token width
  std::size_t dense_units = 128;
  double gamma = 0.9;
  double eps = 1e-8;
  // Bandit update cadence in training batches; 0 never updates.
  std::size_t bandit_update_every = 1;
  // One Q bank drives both directions; masking removes a head from both.
  bool shared_head_weights = false;
  // Leave-one-out passes rescale the surviving heads to sum to 1.
  bool renormalize_masked = true;

  void validate() const;
};

struct HeadProjection {
  Tensor query;  // [token_channels x head_dim]
  Tensor key;
  Tensor value;
};

struct FusionModelParams {
  ConvStack branch_a;
  ConvStack branch_b;
  // heads[direction][h]. Queries are projected from the direction's source
  // branch, keys and values from the other branch.
  std::array<std::vector<HeadProjection>, 2> heads;
  Linear dense;
  Linear out;

  static FusionModelParams init(const FusionConfig& cfg, Rng& rng);
  std::size_t n_heads() const { return heads[0].size(); }
  std::size_t head_dim() const { return heads[0].front().query.dim(1); }
  std::vector<NamedTensor> parameters() const;
};

// conv stack, then the [batch x channels x L] map read as L tokens:
// [batch x L x channels].
Tensor branch_tokens(const ConvStack& stack, const Tensor& x);

// [batch x L x channels] * [channels x d_h] -> [batch x L x d_h]
Tensor project_tokens(const Tensor& tokens, const Tensor& projection);

// softmax(Q K^T / sqrt(d_h)): [batch x L_q x L_k]
Tensor attention_weights(const Tensor& queries, const Tensor& keys);

// softmax(Q K^T / sqrt(d_h)) V: [batch x L_q x d_h]
Tensor cross_attention_head(const Tensor& queries, const Tensor& keys, const Tensor& values);

/// Per-head attention outputs for both directions.
struct HeadOutputs {
  std::array<std::vector<Tensor>, 2> per_direction;
};

HeadOutputs attend(const FusionModelParams& params, const Tensor& tokens_a,
                   const Tensor& tokens_b);

// sum_h w_h A_h, mean-pooled over query tokens: [batch x d_h]
Tensor combine_heads(const std::vector<Tensor>& heads, std::span<const double> weights);

struct FusionOutput {
  Tensor logits;       // [batch x 2]
  Tensor z_fused;      // [batch x 2 d_h]
  Tensor penultimate;  // [batch x dense_units]
};

FusionOutput classify(const FusionModelParams& params, const HeadOutputs& heads,
                      const PerDirection& weights);

FusionOutput fuse_forward(const FusionModelParams& params, const PerDirection& weights,
                          const Tensor& x_a, const Tensor& x_b);
FusionOutput fuse_forward(const FusionModelParams& params, const BanditState& state,
                          const Tensor& x_a, const Tensor& x_b);

// Plain multi-head cross-attention fusion: heads averaged with weight 1/H.
FusionOutput cross_attention_forward(const FusionModelParams& params, const Tensor& x_a,
                                     const Tensor& x_b);

struct BanditStepReport {
  double loss_full = 0.0;
  PerDirection masked_losses;
  PerDirection rewards;
};

// Leave-one-head-out loss on the batch for every head and direction, turned
// into rewards and folded into the Q values. Records no gradients.
BanditStepReport bandit_step(const FusionModelParams& params, BanditState& state,
                             const FusionConfig& cfg, const Tensor& x_a, const Tensor& x_b,
                             std::span<const std::size_t> labels);

}  // namespace baomi
