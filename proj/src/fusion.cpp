#include "baomi/fusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "baomi/ops.hpp"

namespace baomi {

namespace {

std::size_t other(std::size_t direction) { return 1 - direction; }

// Weights with head `masked` zeroed; survivors rescaled when requested.
std::vector<double> drop_head(std::vector<double> weights, std::size_t masked, bool renormalize) {
  const double removed = weights[masked];
  weights[masked] = 0.0;
  if (renormalize && removed < 1.0) {
    for (double& w : weights) w /= 1.0 - removed;
  }
  return weights;
}

}  // namespace

void FusionConfig::validate() const {
  if (n_heads < 1) throw std::invalid_argument("fusion: n_heads must be >= 1");
  if (head_dim < 1) throw std::invalid_argument("fusion: head_dim must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("fusion: gamma must be in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("fusion: eps must be positive");
  if (convs.conv1_filters < 1 || convs.conv2_filters < 1 || dense_units < 1) {
    throw std::invalid_argument("fusion: layer widths must be positive");
  }
}

FusionModelParams FusionModelParams::init(const FusionConfig& cfg, Rng& rng) {
  cfg.validate();
  FusionModelParams p;
  p.branch_a = ConvStack::init(cfg.convs, rng);
  p.branch_b = ConvStack::init(cfg.convs, rng);
  const std::size_t channels = cfg.convs.conv2_filters;
  for (auto& bank : p.heads) {
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      HeadProjection proj;
      proj.query = glorot_uniform({channels, cfg.head_dim}, channels, cfg.head_dim, rng);
      proj.key = glorot_uniform({channels, cfg.head_dim}, channels, cfg.head_dim, rng);
      proj.value = glorot_uniform({channels, cfg.head_dim}, channels, cfg.head_dim, rng);
      bank.push_back(std::move(proj));
    }
  }
  p.dense = Linear::init(2 * cfg.head_dim, cfg.dense_units, rng);
  p.out = Linear::init(cfg.dense_units, kNumClasses, rng);
  return p;
}

std::vector<NamedTensor> FusionModelParams::parameters() const {
  std::vector<NamedTensor> out;
  branch_a.collect("baomi.branch_a", out);
  branch_b.collect("baomi.branch_b", out);
  for (Direction d : kDirections) {
    const auto& bank = heads[index_of(d)];
    for (std::size_t h = 0; h < bank.size(); ++h) {
      const std::string prefix =
          std::string("baomi.") + direction_name(d) + ".head" + std::to_string(h);
      out.push_back({prefix + ".query", bank[h].query});
      out.push_back({prefix + ".key", bank[h].key});
      out.push_back({prefix + ".value", bank[h].value});
    }
  }
  dense.collect("baomi.dense", out);
  this->out.collect("baomi.out", out);
  return out;
}

Tensor branch_tokens(const ConvStack& stack, const Tensor& x) {
  return ops::transpose_last2(stack.forward(x));
}

Tensor project_tokens(const Tensor& tokens, const Tensor& projection) {
  if (tokens.rank() != 3 || projection.rank() != 2 || tokens.dim(2) != projection.dim(0)) {
    throw ShapeError("project_tokens: tokens " + to_string(tokens.shape()) +
                     " vs projection " + to_string(projection.shape()));
  }
  const std::size_t batch = tokens.dim(0), len = tokens.dim(1);
  Tensor flat = ops::reshape(tokens, {batch * len, tokens.dim(2)});
  return ops::reshape(ops::matmul(flat, projection), {batch, len, projection.dim(1)});
}

Tensor attention_weights(const Tensor& queries, const Tensor& keys) {
  if (queries.rank() != 3 || keys.rank() != 3 || queries.dim(0) != keys.dim(0) ||
      queries.dim(2) != keys.dim(2)) {
    throw ShapeError("attention: queries " + to_string(queries.shape()) + " vs keys " +
                     to_string(keys.shape()));
  }
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(queries.dim(2)));
  return ops::softmax(ops::scale(ops::bmm(queries, ops::transpose_last2(keys)), inv_sqrt_dh));
}

Tensor cross_attention_head(const Tensor& queries, const Tensor& keys, const Tensor& values) {
  if (values.rank() != 3 || values.dim(0) != keys.dim(0) || values.dim(1) != keys.dim(1) ||
      values.dim(2) != queries.dim(2)) {
    throw ShapeError("attention: values " + to_string(values.shape()) + " vs keys " +
                     to_string(keys.shape()) + " and queries " + to_string(queries.shape()));
  }
  return ops::bmm(attention_weights(queries, keys), values);
}

HeadOutputs attend(const FusionModelParams& params, const Tensor& tokens_a,
                   const Tensor& tokens_b) {
  const std::array<const Tensor*, 2> source = {&tokens_a, &tokens_b};
  HeadOutputs out;
  for (Direction d : kDirections) {
    const std::size_t i = index_of(d);
    const Tensor& query_side = *source[i];
    const Tensor& key_side = *source[other(i)];
    for (const HeadProjection& proj : params.heads[i]) {
      out.per_direction[i].push_back(cross_attention_head(project_tokens(query_side, proj.query),
                                                          project_tokens(key_side, proj.key),
                                                          project_tokens(key_side, proj.value)));
    }
  }
  return out;
}

Tensor combine_heads(const std::vector<Tensor>& heads, std::span<const double> weights) {
  if (heads.empty() || heads.size() != weights.size()) {
    throw ShapeError("combine_heads: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(heads.size()) + " heads");
  }
  Tensor mixed = ops::scale(heads[0], weights[0]);
  for (std::size_t h = 1; h < heads.size(); ++h) {
    mixed = ops::add(mixed, ops::scale(heads[h], weights[h]));
  }
  return ops::mean_over(mixed, 1);
}

namespace {

FusionOutput head_and_classifier(const FusionModelParams& params, const Tensor& pooled_a,
                                 const Tensor& pooled_b) {
  FusionOutput out;
  out.z_fused = ops::concat_columns(pooled_a, pooled_b);
  out.penultimate = ops::relu(params.dense.forward(out.z_fused));
  out.logits = params.out.forward(out.penultimate);
  return out;
}

void check_pair(const Tensor& x_a, const Tensor& x_b) {
  if (x_a.rank() != 2 || x_b.rank() != 2 || x_a.dim(0) != x_b.dim(0)) {
    throw ShapeError("fusion: branch inputs " + to_string(x_a.shape()) + " and " +
                     to_string(x_b.shape()) + " must be [batch x d] with equal batch");
  }
}

}  // namespace

FusionOutput classify(const FusionModelParams& params, const HeadOutputs& heads,
                      const PerDirection& weights) {
  return head_and_classifier(params, combine_heads(heads.per_direction[0], weights[0]),
                             combine_heads(heads.per_direction[1], weights[1]));
}

FusionOutput fuse_forward(const FusionModelParams& params, const PerDirection& weights,
                          const Tensor& x_a, const Tensor& x_b) {
  check_pair(x_a, x_b);
  const HeadOutputs heads =
      attend(params, branch_tokens(params.branch_a, x_a), branch_tokens(params.branch_b, x_b));
  return classify(params, heads, weights);
}

FusionOutput fuse_forward(const FusionModelParams& params, const BanditState& state,
                          const Tensor& x_a, const Tensor& x_b) {
  if (state.n_heads() != params.n_heads()) {
    throw std::invalid_argument("bandit state tracks " + std::to_string(state.n_heads()) +
                                " heads, model has " + std::to_string(params.n_heads()));
  }
  return fuse_forward(params, all_head_weights(state), x_a, x_b);
}

FusionOutput cross_attention_forward(const FusionModelParams& params, const Tensor& x_a,
                                     const Tensor& x_b) {
  check_pair(x_a, x_b);
  const HeadOutputs heads =
      attend(params, branch_tokens(params.branch_a, x_a), branch_tokens(params.branch_b, x_b));
  std::array<Tensor, 2> pooled;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& bank = heads.per_direction[i];
    Tensor total = bank[0];
    for (std::size_t h = 1; h < bank.size(); ++h) total = ops::add(total, bank[h]);
    pooled[i] = ops::mean_over(ops::scale(total, 1.0 / static_cast<double>(bank.size())), 1);
  }
  return head_and_classifier(params, pooled[0], pooled[1]);
}

BanditStepReport bandit_step(const FusionModelParams& params, BanditState& state,
                             const FusionConfig& cfg, const Tensor& x_a, const Tensor& x_b,
                             std::span<const std::size_t> labels) {
  check_pair(x_a, x_b);
  if (state.n_heads() != params.n_heads()) {
    throw std::invalid_argument("bandit state tracks " + std::to_string(state.n_heads()) +
                                " heads, model has " + std::to_string(params.n_heads()));
  }
  NoGradGuard no_grad;
  const HeadOutputs heads =
      attend(params, branch_tokens(params.branch_a, x_a), branch_tokens(params.branch_b, x_b));
  const PerDirection weights = all_head_weights(state);
  const std::size_t n_heads = params.n_heads();

  BanditStepReport report;
  report.loss_full = ops::cross_entropy(classify(params, heads, weights).logits, labels).item();

  auto masked_loss = [&](PerDirection masked) {
    return ops::cross_entropy(classify(params, heads, masked).logits, labels).item();
  };

  if (cfg.shared_head_weights) {
    std::vector<double> losses(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
      losses[h] = masked_loss({drop_head(weights[0], h, cfg.renormalize_masked),
                               drop_head(weights[1], h, cfg.renormalize_masked)});
    }
    const std::vector<double> rewards = compute_rewards(losses, report.loss_full, cfg.eps);
    report.masked_losses = {losses, losses};
    report.rewards = {rewards, rewards};
  } else {
    for (Direction d : kDirections) {
      const std::size_t i = index_of(d);
      std::vector<double> losses(n_heads);
      for (std::size_t h = 0; h < n_heads; ++h) {
        PerDirection masked = weights;
        masked[i] = drop_head(weights[i], h, cfg.renormalize_masked);
        losses[h] = masked_loss(std::move(masked));
      }
      report.rewards[i] = compute_rewards(losses, report.loss_full, cfg.eps);
      report.masked_losses[i] = std::move(losses);
    }
  }

  update_q(state, report.rewards, cfg.gamma);
  state.last_loss = report.loss_full;
  return report;
}

}  // namespace baomi
