#include <doctest.h>

#include <cmath>
#include <vector>

#include "baomi/fusion.hpp"
#include "baomi/ops.hpp"
#include "baomi/rng.hpp"
#include "support/oracles.hpp"

using namespace baomi;

namespace {

using Mat = std::vector<std::vector<double>>;  // rows

Tensor random_input(Rng& rng, std::size_t batch, std::size_t d, double scale = 1.0) {
  std::vector<double> v(batch * d);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from({batch, d}, v);
}

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

FusionConfig tiny_config() {
  FusionConfig cfg;
  cfg.n_heads = 2;
  cfg.head_dim = 2;
  cfg.convs = {3, 4};
  cfg.dense_units = 5;
  return cfg;
}

// ---- straight-line re-implementation of the fusion forward pass ----

// one example -> tokens [L x C]
Mat oracle_tokens(const ConvStack& s, const std::vector<double>& x) {
  const std::size_t d = x.size();
  const std::size_t c1 = s.conv1.kernels.dim(0), c2 = s.conv2.kernels.dim(0);
  auto h = oracle::conv1d(x, vec(s.conv1.kernels), vec(s.conv1.bias), 1, c1, d);
  for (double& v : h) v = std::max(v, 0.0);
  h = oracle::maxpool(h, c1, d);
  const std::size_t l1 = d / 2;
  auto g = oracle::conv1d(h, vec(s.conv2.kernels), vec(s.conv2.bias), c1, c2, l1);
  for (double& v : g) v = std::max(v, 0.0);
  g = oracle::maxpool(g, c2, l1);
  const std::size_t l2 = l1 / 2;
  Mat tokens(l2, std::vector<double>(c2));
  for (std::size_t c = 0; c < c2; ++c)
    for (std::size_t t = 0; t < l2; ++t) tokens[t][c] = g[c * l2 + t];
  return tokens;
}

Mat project(const Mat& tokens, const Tensor& w) {
  const std::size_t c = w.dim(0), dh = w.dim(1);
  Mat out(tokens.size(), std::vector<double>(dh, 0.0));
  for (std::size_t t = 0; t < tokens.size(); ++t)
    for (std::size_t j = 0; j < dh; ++j)
      for (std::size_t k = 0; k < c; ++k) out[t][j] += tokens[t][k] * w.data()[k * dh + j];
  return out;
}

Mat attention(const Mat& q, const Mat& k, const Mat& v) {
  const double dh = static_cast<double>(q[0].size());
  Mat out(q.size(), std::vector<double>(v[0].size(), 0.0));
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::vector<double> s(k.size());
    double total = 0;
    for (std::size_t j = 0; j < k.size(); ++j) {
      double dot = 0;
      for (std::size_t m = 0; m < q[i].size(); ++m) dot += q[i][m] * k[j][m];
      s[j] = std::exp(dot / std::sqrt(dh));
      total += s[j];
    }
    for (std::size_t j = 0; j < k.size(); ++j)
      for (std::size_t m = 0; m < v[j].size(); ++m) out[i][m] += s[j] / total * v[j][m];
  }
  return out;
}

std::vector<double> oracle_logits(const FusionModelParams& p, const PerDirection& w,
                                  const std::vector<double>& xa, const std::vector<double>& xb,
                                  std::vector<double>* penultimate = nullptr) {
  const Mat ta = oracle_tokens(p.branch_a, xa), tb = oracle_tokens(p.branch_b, xb);
  const Mat* src[2] = {&ta, &tb};
  std::vector<double> z;
  for (std::size_t dir = 0; dir < 2; ++dir) {
    const Mat& qs = *src[dir];
    const Mat& ks = *src[1 - dir];
    const std::size_t dh = p.head_dim();
    Mat mixed(qs.size(), std::vector<double>(dh, 0.0));
    for (std::size_t h = 0; h < p.n_heads(); ++h) {
      const auto& pr = p.heads[dir][h];
      const Mat a = attention(project(qs, pr.query), project(ks, pr.key), project(ks, pr.value));
      for (std::size_t i = 0; i < qs.size(); ++i)
        for (std::size_t m = 0; m < dh; ++m) mixed[i][m] += w[dir][h] * a[i][m];
    }
    for (std::size_t m = 0; m < dh; ++m) {
      double s = 0;
      for (const auto& row : mixed) s += row[m];
      z.push_back(s / static_cast<double>(mixed.size()));
    }
  }
  auto dense = [](const std::vector<double>& x, const Linear& l, bool relu) {
    const std::size_t in = l.in_features(), out = l.out_features();
    std::vector<double> y(out);
    for (std::size_t j = 0; j < out; ++j) {
      double s = l.bias.data()[j];
      for (std::size_t i = 0; i < in; ++i) s += x[i] * l.weight.data()[i * out + j];
      y[j] = relu ? std::max(s, 0.0) : s;
    }
    return y;
  };
  const auto hidden = dense(z, p.dense, true);
  if (penultimate) *penultimate = hidden;
  return dense(hidden, p.out, false);
}

std::vector<double> row(const Tensor& x, std::size_t r) {
  const std::size_t d = x.dim(1);
  return {x.data().begin() + r * d, x.data().begin() + (r + 1) * d};
}

}  // namespace

TEST_CASE("branch tokens") {
  Rng rng(1);
  const ConvStack stack = ConvStack::init(ConvStackConfig{}, rng);
  CHECK(branch_tokens(stack, random_input(rng, 2, 40)).shape() == Shape{2, 10, 128});
  CHECK(branch_tokens(stack, random_input(rng, 1, 3225)).shape() == Shape{1, 806, 128});
  CHECK_THROWS_AS(branch_tokens(stack, random_input(rng, 1, 3)), ShapeError);
  ConvStack zeroed = ConvStack::init(ConvStackConfig{4, 6}, rng);
  for (double& v : zeroed.conv1.bias.mutable_data()) v = 0;
  for (double& v : zeroed.conv2.bias.mutable_data()) v = 0;
  const Tensor tokens = branch_tokens(zeroed, Tensor::zeros({2, 12}));
  for (double v : tokens.data()) CHECK(v == 0.0);
}

TEST_CASE("cross_attention_head") {
  Rng rng(2);
  auto rnd = [&](Shape s) {
    std::vector<double> v(element_count(s));
    for (double& x : v) x = rng.uniform(-1, 1);
    return Tensor::from(s, v);
  };
  SUBCASE("a single key returns its value row") {
    const Tensor q = rnd({1, 4, 3}), k = rnd({1, 1, 3}), v = rnd({1, 1, 3});
    const Tensor out = cross_attention_head(q, k, v);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t m = 0; m < 3; ++m) CHECK(std::abs(out.at({0, i, m}) - v.at({0, 0, m})) < 1e-15);
  }
  SUBCASE("zero scores average the values") {
    const Tensor q = Tensor::zeros({1, 2, 2}), k = rnd({1, 3, 2}), v = rnd({1, 3, 2});
    const Tensor out = cross_attention_head(q, k, v);
    for (std::size_t m = 0; m < 2; ++m) {
      const double mean = (v.at({0, 0, m}) + v.at({0, 1, m}) + v.at({0, 2, m})) / 3;
      CHECK(std::abs(out.at({0, 0, m}) - mean) < 1e-15);
      CHECK(std::abs(out.at({0, 1, m}) - mean) < 1e-15);
    }
  }
  SUBCASE("random 2x3 tokens against the written-out formula") {
    const Tensor q = rnd({1, 2, 2}), k = rnd({1, 3, 2}), v = rnd({1, 3, 2});
    const Tensor out = cross_attention_head(q, k, v);
    Mat Q{row(ops::reshape(q, {2, 2}), 0), row(ops::reshape(q, {2, 2}), 1)};
    Mat K, V;
    for (std::size_t j = 0; j < 3; ++j) {
      K.push_back(row(ops::reshape(k, {3, 2}), j));
      V.push_back(row(ops::reshape(v, {3, 2}), j));
    }
    const Mat want = attention(Q, K, V);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t m = 0; m < 2; ++m) CHECK(std::abs(out.at({0, i, m}) - want[i][m]) < 1e-10);
  }
  SUBCASE("attention rows are stochastic") {
    const Tensor w = attention_weights(rnd({3, 5, 4}), rnd({3, 7, 4}));
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t i = 0; i < 5; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 7; ++j) {
          CHECK(w.at({b, i, j}) > 0.0);
          s += w.at({b, i, j});
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
      }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(cross_attention_head(rnd({1, 2, 3}), rnd({1, 2, 2}), rnd({1, 2, 3})), ShapeError);
    CHECK_THROWS_AS(cross_attention_head(rnd({1, 2, 3}), rnd({1, 2, 3}), rnd({1, 4, 3})), ShapeError);
  }
}

TEST_CASE("fusion parameter layout") {
  Rng rng(3);
  const FusionConfig cfg;
  const FusionModelParams p = FusionModelParams::init(cfg, rng);
  CHECK(p.n_heads() == 4);
  CHECK(p.head_dim() == 32);
  std::size_t projections = 0;
  for (const auto& nt : p.parameters())
    if (nt.name.find(".head") != std::string::npos) {
      ++projections;
      CHECK(nt.tensor.shape() == Shape{128, 32});
    }
  CHECK(projections == 2 * 4 * 3);
  CHECK(p.dense.weight.shape() == Shape{64, 128});
  CHECK(p.out.weight.shape() == Shape{128, 2});
}

TEST_CASE("fuse_forward matches the scripted oracle") {
  Rng rng(4);
  const FusionModelParams p = FusionModelParams::init(tiny_config(), rng);
  const Tensor xa = random_input(rng, 3, 8), xb = random_input(rng, 3, 8);
  const PerDirection w{std::vector<double>{0.8, 0.2}, std::vector<double>{0.35, 0.65}};
  const FusionOutput out = fuse_forward(p, w, xa, xb);
  CHECK(out.z_fused.shape() == Shape{3, 4});
  CHECK(out.penultimate.shape() == Shape{3, 5});
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> pen;
    const auto want = oracle_logits(p, w, row(xa, r), row(xb, r), &pen);
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(out.logits.at({r, c}) - want[c]) < 1e-12);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(out.penultimate.at({r, j}) - pen[j]) < 1e-12);
  }
}

TEST_CASE("one head ignores its Q value") {
  Rng rng(5);
  FusionConfig cfg = tiny_config();
  cfg.n_heads = 1;
  const FusionModelParams p = FusionModelParams::init(cfg, rng);
  const Tensor xa = random_input(rng, 2, 12), xb = random_input(rng, 2, 8);
  BanditState s = BanditState::initial(1);
  const auto base = vec(fuse_forward(p, s, xa, xb).logits);
  s.q_values = {std::vector<double>{3.7}, std::vector<double>{-2.0}};
  CHECK(vec(fuse_forward(p, s, xa, xb).logits) == base);
}

TEST_CASE("equal Q values reproduce plain cross-attention") {
  Rng rng(6);
  const FusionModelParams p = FusionModelParams::init(FusionConfig{}, rng);
  const Tensor xa = random_input(rng, 4, 40), xb = random_input(rng, 4, 14);
  const auto base = vec(cross_attention_forward(p, xa, xb).logits);
  for (double q : {0.0, 0.42, -3.0}) {
    BanditState s = BanditState::initial(4);
    for (auto& bank : s.q_values) std::fill(bank.begin(), bank.end(), q);
    const auto got = vec(fuse_forward(p, s, xa, xb).logits);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(got[i] - base[i]) < 1e-9);
  }
}

TEST_CASE("bandit_step bookkeeping") {
  Rng rng(7);
  const FusionConfig cfg = tiny_config();
  const FusionModelParams p = FusionModelParams::init(cfg, rng);
  const Tensor xa = random_input(rng, 6, 8), xb = random_input(rng, 6, 12);
  const std::vector<std::size_t> labels{0, 1, 0, 1, 1, 0};
  BanditState s = BanditState::initial(2);
  s.q_values = {std::vector<double>{0.3, -0.1}, std::vector<double>{0.0, 0.5}};
  const BanditState before = s;
  const PerDirection w = all_head_weights(before);
  const BanditStepReport rep = bandit_step(p, s, cfg, xa, xb, labels);

  CHECK(rep.loss_full == doctest::Approx(ops::cross_entropy(fuse_forward(p, w, xa, xb).logits, labels).item()).epsilon(1e-14));
  for (std::size_t dir = 0; dir < 2; ++dir) {
    for (std::size_t h = 0; h < 2; ++h) {
      PerDirection masked = w;
      masked[dir][h] = 0.0;
      const double keep = 1.0 - w[dir][h];
      for (double& v : masked[dir]) v /= keep;
      const double want = ops::cross_entropy(fuse_forward(p, masked, xa, xb).logits, labels).item();
      CHECK(std::abs(rep.masked_losses[dir][h] - want) < 1e-12);
    }
    const auto r = compute_rewards(rep.masked_losses[dir], rep.loss_full, cfg.eps);
    for (std::size_t h = 0; h < 2; ++h) {
      CHECK(rep.rewards[dir][h] == r[h]);
      CHECK(s.q_values[dir][h] == doctest::Approx(0.9 * before.q_values[dir][h] + 0.1 * r[h]));
    }
  }
  CHECK(s.update_count == 1);
  REQUIRE(s.last_loss.has_value());
  CHECK(*s.last_loss == rep.loss_full);
  // parameters gain no gradient from the counterfactual passes
  for (const auto& nt : p.parameters()) CHECK_FALSE(nt.tensor.has_grad());
}

TEST_CASE("a harmful head earns no reward") {
  // scan a few fixed models for a head whose removal lowers the loss
  bool found = false;
  for (std::uint64_t seed = 0; seed < 50 && !found; ++seed) {
    Rng rng(seed);
    const FusionConfig cfg = tiny_config();
    const FusionModelParams p = FusionModelParams::init(cfg, rng);
    const Tensor xa = random_input(rng, 4, 8), xb = random_input(rng, 4, 8);
    const std::vector<std::size_t> labels{0, 1, 1, 0};
    BanditState s = BanditState::initial(2);
    const auto rep = bandit_step(p, s, cfg, xa, xb, labels);
    for (std::size_t dir = 0; dir < 2; ++dir)
      for (std::size_t h = 0; h < 2; ++h)
        if (rep.masked_losses[dir][h] < rep.loss_full) {
          found = true;
          CHECK(rep.rewards[dir][h] == 0.0);
        }
  }
  CHECK(found);
}

TEST_CASE("a null head has zero reward and its Q decays") {
  Rng rng(8);
  FusionConfig cfg = tiny_config();
  cfg.n_heads = 3;
  cfg.renormalize_masked = false;
  FusionModelParams p = FusionModelParams::init(cfg, rng);
  for (std::size_t dir = 0; dir < 2; ++dir) {
    for (Tensor t : {p.heads[dir][1].query, p.heads[dir][1].key, p.heads[dir][1].value})
      for (double& v : t.mutable_data()) v = 0.0;
  }
  const Tensor xa = random_input(rng, 5, 8), xb = random_input(rng, 5, 8);
  const std::vector<std::size_t> labels{1, 1, 0, 0, 1};
  BanditState s = BanditState::initial(3);
  s.q_values = {std::vector<double>{0.0, 1.0, 0.0}, std::vector<double>{0.0, 1.0, 0.0}};
  double expected = 1.0;
  for (int t = 0; t < 5; ++t) {
    const auto rep = bandit_step(p, s, cfg, xa, xb, labels);
    expected *= cfg.gamma;
    for (std::size_t dir = 0; dir < 2; ++dir) {
      CHECK(rep.masked_losses[dir][1] == rep.loss_full);
      CHECK(rep.rewards[dir][1] == 0.0);
      CHECK(s.q_values[dir][1] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("shared head weights keep both banks equal") {
  Rng rng(9);
  FusionConfig cfg = tiny_config();
  cfg.shared_head_weights = true;
  const FusionModelParams p = FusionModelParams::init(cfg, rng);
  const Tensor xa = random_input(rng, 4, 8), xb = random_input(rng, 4, 8);
  const std::vector<std::size_t> labels{0, 1, 0, 1};
  BanditState s = BanditState::initial(2);
  for (int t = 0; t < 3; ++t) {
    const auto rep = bandit_step(p, s, cfg, xa, xb, labels);
    CHECK(rep.rewards[0] == rep.rewards[1]);
    CHECK(s.q_values[0] == s.q_values[1]);
  }
}

TEST_CASE("mismatched bandit state") {
  Rng rng(10);
  const FusionModelParams p = FusionModelParams::init(tiny_config(), rng);
  const BanditState s = BanditState::initial(3);
  CHECK_THROWS_AS(fuse_forward(p, s, random_input(rng, 1, 8), random_input(rng, 1, 8)),
                  std::invalid_argument);
  CHECK_THROWS_AS(fuse_forward(p, all_head_weights(BanditState::initial(2)), random_input(rng, 2, 8),
                               random_input(rng, 3, 8)),
                  ShapeError);
}
