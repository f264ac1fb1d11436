#include "baomi/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace baomi::ops {

namespace {

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) +
                     " and " + to_string(b.shape()) + " differ");
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + to_string(a.shape()));
  }
}

// Grad buffer of parent i, or nullptr when that parent is not differentiable.
std::vector<double>* parent_grad(Node& self, std::size_t i) {
  Node& parent = *self.parents[i];
  return parent.requires_grad ? &parent.ensure_grad() : nullptr;
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x k] += g[m x n] * b[k x n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T * g[m x n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* g = parent_grad(self, p)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->data;
    const auto& bv = self.parents[1]->data;
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, a.data()[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      const auto& in = self.parents[0]->data;
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (in[i] > 0.0) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::make_result({}, {total}, {a}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (double& v : *g) v += self.grad[0];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(bias, 1, "add_bias");
  if (x.rank() == 0 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("add_bias: input " + to_string(x.shape()) +
                     " does not end in bias width " + to_string(bias.shape()));
  }
  const std::size_t n = bias.dim(0);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias.data()[i % n];
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [n](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i % n] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* av = self.parents[0]->data.data();
    const double* bv = self.parents[1]->data.data();
    if (auto* g = parent_grad(self, 0)) gemm_nt(self.grad.data(), bv, g->data(), m, k, n);
    if (auto* g = parent_grad(self, 1)) gemm_tn(av, self.grad.data(), g->data(), m, k, n);
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) ||
      a.dim(2) != b.dim(1)) {
    throw ShapeError("bmm: cannot multiply " + to_string(a.shape()) + " by " +
                     to_string(b.shape()));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_nn(a.data().data() + s * m * k, b.data().data() + s * k * n,
            out.data() + s * m * n, m, k, n);
  }
  return Tensor::make_result(
      {batch, m, n}, std::move(out), {a, b}, [batch, m, k, n](Node& self) {
        const double* av = self.parents[0]->data.data();
        const double* bv = self.parents[1]->data.data();
        auto* ga = parent_grad(self, 0);
        auto* gb = parent_grad(self, 1);
        for (std::size_t s = 0; s < batch; ++s) {
          const double* gs = self.grad.data() + s * m * n;
          if (ga) gemm_nt(gs, bv + s * k * n, ga->data() + s * m * k, m, k, n);
          if (gb) gemm_tn(av + s * m * k, gs, gb->data() + s * k * n, m, k, n);
        }
      });
}

Tensor transpose_last2(const Tensor& a) {
  if (a.rank() != 2 && a.rank() != 3) {
    throw ShapeError("transpose_last2: unsupported shape " + to_string(a.shape()));
  }
  const std::size_t batch = a.rank() == 3 ? a.dim(0) : 1;
  const std::size_t rows = a.dim(a.rank() - 2), cols = a.dim(a.rank() - 1);
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  std::vector<double> out(a.numel());
  for (std::size_t s = 0; s < batch; ++s) {
    const double* src = a.data().data() + s * rows * cols;
    double* dst = out.data() + s * rows * cols;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
  return Tensor::make_result(
      std::move(shape), std::move(out), {a}, [batch, rows, cols](Node& self) {
        if (auto* g = parent_grad(self, 0)) {
          for (std::size_t s = 0; s < batch; ++s) {
            const double* src = self.grad.data() + s * rows * cols;
            double* dst = g->data() + s * rows * cols;
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] += src[c * rows + r];
          }
        }
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (element_count(shape) != a.numel()) {
    throw ShapeError("reshape: " + to_string(a.shape()) + " to " + to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 2 && input.rank() != 3) {
    throw ShapeError("conv1d: input must be [channels x length] or "
                     "[batch x channels x length], got " + to_string(input.shape()));
  }
  require_rank(kernels, 3, "conv1d");
  require_rank(bias, 1, "conv1d");
  const bool batched = input.rank() == 3;
  const std::size_t batch = batched ? input.dim(0) : 1;
  const std::size_t cin = input.dim(batched ? 1 : 0);
  const std::size_t len = input.dim(batched ? 2 : 1);
  const std::size_t cout = kernels.dim(0);
  if (kernels.dim(2) != 3) {
    throw ShapeError("conv1d: kernel width must be 3, got " + to_string(kernels.shape()));
  }
  if (kernels.dim(1) != cin) {
    throw ShapeError("conv1d: channel mismatch, input " + to_string(input.shape()) +
                     " vs kernels " + to_string(kernels.shape()));
  }
  if (bias.dim(0) != cout) {
    throw ShapeError("conv1d: bias " + to_string(bias.shape()) + " for " +
                     std::to_string(cout) + " output channels");
  }

  std::vector<double> out(batch * cout * len);
  const double* x = input.data().data();
  const double* w = kernels.data().data();
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t o = 0; o < cout; ++o) {
      double* y = out.data() + (s * cout + o) * len;
      std::fill(y, y + len, bias.data()[o]);
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xr = x + (s * cin + c) * len;
        const double* wk = w + (o * cin + c) * 3;
        // y[t] += w0 x[t-1] + w1 x[t] + w2 x[t+1], zeros outside [0, len)
        for (std::size_t t = 0; t < len; ++t) y[t] += wk[1] * xr[t];
        for (std::size_t t = 1; t < len; ++t) y[t] += wk[0] * xr[t - 1];
        for (std::size_t t = 0; t + 1 < len; ++t) y[t] += wk[2] * xr[t + 1];
      }
    }
  }

  Shape shape = batched ? Shape{batch, cout, len} : Shape{cout, len};
  return Tensor::make_result(
      std::move(shape), std::move(out), {input, kernels, bias},
      [batch, cin, cout, len](Node& self) {
        const double* x = self.parents[0]->data.data();
        const double* w = self.parents[1]->data.data();
        auto* gx = parent_grad(self, 0);
        auto* gw = parent_grad(self, 1);
        auto* gb = parent_grad(self, 2);
        for (std::size_t s = 0; s < batch; ++s) {
          for (std::size_t o = 0; o < cout; ++o) {
            const double* gy = self.grad.data() + (s * cout + o) * len;
            if (gb) {
              double acc = 0.0;
              for (std::size_t t = 0; t < len; ++t) acc += gy[t];
              (*gb)[o] += acc;
            }
            for (std::size_t c = 0; c < cin; ++c) {
              const double* xr = x + (s * cin + c) * len;
              const double* wk = w + (o * cin + c) * 3;
              if (gw) {
                double* gk = gw->data() + (o * cin + c) * 3;
                double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                for (std::size_t t = 1; t < len; ++t) a0 += gy[t] * xr[t - 1];
                for (std::size_t t = 0; t < len; ++t) a1 += gy[t] * xr[t];
                for (std::size_t t = 0; t + 1 < len; ++t) a2 += gy[t] * xr[t + 1];
                gk[0] += a0;
                gk[1] += a1;
                gk[2] += a2;
              }
              if (gx) {
                double* gxr = gx->data() + (s * cin + c) * len;
                for (std::size_t t = 0; t < len; ++t) gxr[t] += wk[1] * gy[t];
                for (std::size_t t = 1; t < len; ++t) gxr[t - 1] += wk[0] * gy[t];
                for (std::size_t t = 0; t + 1 < len; ++t) gxr[t + 1] += wk[2] * gy[t];
              }
            }
          }
        }
      });
}

Tensor maxpool1d(const Tensor& input) {
  if (input.rank() == 0 || input.shape().back() < 2) {
    throw ShapeError("maxpool1d: last axis must have length >= 2, got " +
                     to_string(input.shape()));
  }
  const std::size_t len = input.shape().back();
  const std::size_t pooled = len / 2;
  const std::size_t rows = input.numel() / len;
  Shape shape = input.shape();
  shape.back() = pooled;

  std::vector<double> out(rows * pooled);
  std::vector<std::size_t> argmax(rows * pooled);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = input.data().data() + r * len;
    for (std::size_t j = 0; j < pooled; ++j) {
      const std::size_t first = 2 * j;
      const std::size_t pick = x[first + 1] > x[first] ? first + 1 : first;
      out[r * pooled + j] = x[pick];
      argmax[r * pooled + j] = r * len + pick;
    }
  }
  return Tensor::make_result(
      std::move(shape), std::move(out), {input},
      [argmax = std::move(argmax)](Node& self) {
        if (auto* g = parent_grad(self, 0)) {
          for (std::size_t i = 0; i < argmax.size(); ++i) (*g)[argmax[i]] += self.grad[i];
        }
      });
}

Tensor softmax(const Tensor& input) {
  if (input.rank() == 0) throw ShapeError("softmax: scalar input");
  const std::size_t n = input.shape().back();
  const std::size_t rows = n == 0 ? 0 : input.numel() / n;
  std::vector<double> out(input.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = input.data().data() + r * n;
    double* y = out.data() + r * n;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(x[i])) throw std::domain_error("softmax: NaN input");
      peak = std::max(peak, x[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += (y[i] = std::exp(x[i] - peak));
    for (std::size_t i = 0; i < n; ++i) y[i] /= total;
  }
  return Tensor::make_result(input.shape(), std::move(out), {input}, [n, rows](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      // dx_i = y_i (dy_i - sum_j dy_j y_j)
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = self.data.data() + r * n;
        const double* gy = self.grad.data() + r * n;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += gy[i] * y[i];
        for (std::size_t i = 0; i < n; ++i) (*g)[r * n + i] += y[i] * (gy[i] - dot);
      }
    }
  });
}

Tensor mean_over(const Tensor& input, std::size_t axis) {
  if (axis >= input.rank()) {
    throw ShapeError("mean_over: axis " + std::to_string(axis) + " out of range for " +
                     to_string(input.shape()));
  }
  const Shape& in = input.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t extent = in[axis];
  if (extent == 0) throw ShapeError("mean_over: empty axis");
  Shape shape;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (i != axis) shape.push_back(in[i]);

  std::vector<double> out(outer * inner, 0.0);
  const double* x = input.data().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t e = 0; e < extent; ++e)
      for (std::size_t i = 0; i < inner; ++i)
        out[o * inner + i] += x[(o * extent + e) * inner + i];
  const double inv = 1.0 / static_cast<double>(extent);
  for (double& v : out) v *= inv;

  return Tensor::make_result(
      std::move(shape), std::move(out), {input}, [outer, extent, inner, inv](Node& self) {
        if (auto* g = parent_grad(self, 0)) {
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t e = 0; e < extent; ++e)
              for (std::size_t i = 0; i < inner; ++i)
                (*g)[(o * extent + e) * inner + i] += self.grad[o * inner + i] * inv;
        }
      });
}

Tensor concat_columns(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_columns");
  require_rank(b, 2, "concat_columns");
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("concat_columns: row counts differ, " + to_string(a.shape()) +
                     " and " + to_string(b.shape()));
  }
  const std::size_t rows = a.dim(0), na = a.dim(1), nb = b.dim(1);
  std::vector<double> out(rows * (na + nb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * na, na, out.data() + r * (na + nb));
    std::copy_n(b.data().data() + r * nb, nb, out.data() + r * (na + nb) + na);
  }
  return Tensor::make_result(
      {rows, na + nb}, std::move(out), {a, b}, [rows, na, nb](Node& self) {
        auto* ga = parent_grad(self, 0);
        auto* gb = parent_grad(self, 1);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gy = self.grad.data() + r * (na + nb);
          if (ga) for (std::size_t i = 0; i < na; ++i) (*ga)[r * na + i] += gy[i];
          if (gb) for (std::size_t i = 0; i < nb; ++i) (*gb)[r * nb + i] += gy[na + i];
        }
      });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + to_string(logits.shape()));
  }
  if (batch == 0) throw ShapeError("cross_entropy: empty batch");
  std::vector<double> probs(batch * classes);
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    if (labels[r] >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[r]) +
                              " outside [0, " + std::to_string(classes) + ")");
    }
    const double* x = logits.data().data() + r * classes;
    double peak = *std::max_element(x, x + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(x[c] - peak);
    const double log_norm = peak + std::log(total);
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(x[c] - log_norm);
    loss -= x[labels[r]] - log_norm;
  }
  loss /= static_cast<double>(batch);
  std::vector<std::size_t> targets(labels.begin(), labels.end());
  return Tensor::make_result(
      {}, {loss}, {logits},
      [probs = std::move(probs), targets = std::move(targets), classes](Node& self) {
        if (auto* g = parent_grad(self, 0)) {
          const double upstream = self.grad[0] / static_cast<double>(targets.size());
          for (std::size_t r = 0; r < targets.size(); ++r) {
            for (std::size_t c = 0; c < classes; ++c) {
              const double indicator = c == targets[r] ? 1.0 : 0.0;
              (*g)[r * classes + c] += upstream * (probs[r * classes + c] - indicator);
            }
          }
        }
      });
}

}  // namespace baomi::ops
