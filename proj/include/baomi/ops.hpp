#pragma once

#include <cstddef>
#include <span>

#include "baomi/tensor.hpp"

// Differentiable tensor operations. All of them allocate a fresh result and
// record a backward closure when any input requires a gradient.
namespace baomi::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor sum(const Tensor& a);

// x[..., n] + bias[n], bias broadcast over all leading axes.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// [m x k] * [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [batch x m x k] * [batch x k x n]
Tensor bmm(const Tensor& a, const Tensor& b);

// Swaps the last two axes of a rank-2 or rank-3 tensor.
Tensor transpose_last2(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Cross-correlation with width-3 kernels and one zero of padding on each
// side, so output length equals input length.
// input [channels_in x length] or [batch x channels_in x length]
// kernels [channels_out x channels_in x 3], bias [channels_out]
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// Non-overlapping windows of 2 along the last axis; an odd trailing element is
// dropped. Ties route the gradient to the first maximal element.
Tensor maxpool1d(const Tensor& input);

// Along the last axis, with max subtraction. NaN input is rejected.
Tensor softmax(const Tensor& input);

// Mean over one axis; that axis is removed from the result.
Tensor mean_over(const Tensor& input, std::size_t axis);

// Concatenates two rank-2 tensors with equal row counts along columns.
Tensor concat_columns(const Tensor& a, const Tensor& b);

// Mean over the batch of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace baomi::ops
