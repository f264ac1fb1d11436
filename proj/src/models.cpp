#include "baomi/models.hpp"

#include "baomi/ops.hpp"

namespace baomi {

FcnParams FcnParams::init(std::size_t input_dim, const FcnConfig& cfg, Rng& rng) {
  FcnParams p;
  p.hidden = Linear::init(input_dim, cfg.hidden_units, rng);
  p.out = Linear::init(cfg.hidden_units, kNumClasses, rng);
  return p;
}

std::vector<NamedTensor> FcnParams::parameters() const {
  std::vector<NamedTensor> out;
  hidden.collect("fcn.hidden", out);
  this->out.collect("fcn.out", out);
  return out;
}

ModelOutput fcn_forward(const FcnParams& params, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != params.input_dim()) {
    throw ShapeError("fcn: input " + to_string(x.shape()) + " does not match input dim " +
                     std::to_string(params.input_dim()));
  }
  Tensor hidden = ops::relu(params.hidden.forward(x));
  return {params.out.forward(hidden), hidden};
}

CnnParams CnnParams::init(std::size_t input_dim, const CnnConfig& cfg, Rng& rng) {
  CnnParams p;
  const std::size_t flat = cfg.convs.conv2_filters * pooled_length(input_dim);
  p.convs = ConvStack::init(cfg.convs, rng);
  p.dense = Linear::init(flat, cfg.dense_units, rng);
  p.out = Linear::init(cfg.dense_units, kNumClasses, rng);
  return p;
}

std::vector<NamedTensor> CnnParams::parameters() const {
  std::vector<NamedTensor> out;
  convs.collect("cnn.convs", out);
  dense.collect("cnn.dense", out);
  this->out.collect("cnn.out", out);
  return out;
}

ModelOutput cnn_forward(const CnnParams& params, const Tensor& x) {
  Tensor maps = params.convs.forward(x);
  const std::size_t flat = maps.dim(1) * maps.dim(2);
  if (flat != params.dense.in_features()) {
    throw ShapeError("cnn: input " + to_string(x.shape()) + " flattens to " +
                     std::to_string(flat) + ", dense layer expects " +
                     std::to_string(params.dense.in_features()));
  }
  Tensor hidden = ops::relu(params.dense.forward(ops::reshape(maps, {x.dim(0), flat})));
  return {params.out.forward(hidden), hidden};
}

std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& n : named) out.push_back(n.tensor);
  return out;
}

}  // namespace baomi
