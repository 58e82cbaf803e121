#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pruneforge/layers.hpp"

using namespace pruneforge;
using pruneforge::testing::check_gradient_fd;

namespace {

Tensor<double> rand_t(std::vector<int64_t> shape, SeededRng& rng, double r = 1.0) {
  return uniform_init<double>(std::move(shape), r, rng);
}

// weighted-sum loss functional: sum(R .* out)
double dot_all(const Tensor<double>& r, const Tensor<double>& out) {
  double s = 0;
  for (int64_t i = 0; i < r.numel(); ++i) s += r.at(i) * out.at(i);
  return s;
}

void randomly_mask(MaskedParameter<double>& p, SeededRng& rng, double frac) {
  for (int64_t i = 0; i < p.numel(); ++i)
    if (rng.next_unit() < frac) p.mask.set(i, false);
}

}  // namespace

TEST_CASE("linear identity forward") {
  LinearLayer<double> layer("w", Tensor<double>::identity(3), Tensor<double>::zeros({3}));
  Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(layer.forward(x).bitwise_equal(x));
}

TEST_CASE("fully masked linear outputs its bias") {
  SeededRng rng(1);
  LinearLayer<double> layer("w", rand_t({3, 4}, rng), Tensor<double>({3}, {0.5, -1.0, 2.0}));
  layer.weight.mask.fill(false);
  layer.refresh_effective();
  auto y = layer.forward(rand_t({5, 4}, rng));
  for (int64_t r = 0; r < 5; ++r) {
    CHECK(y(r, 0) == 0.5);
    CHECK(y(r, 1) == -1.0);
    CHECK(y(r, 2) == 2.0);
  }
}

TEST_CASE("lstm cell with all-zero parameters gives zero state") {
  LstmCell<double> cell("w", Tensor<double>::zeros({8, 5}), Tensor<double>::zeros({8}), 0.0);
  SeededRng rng(2);
  auto x = rand_t({3, 3}, rng);
  auto out = cell.forward(x, LstmState<double>::zero(3, 2));
  for (int64_t i = 0; i < out.h.numel(); ++i) {
    CHECK(out.h.at(i) == 0.0);
    CHECK(out.c.at(i) == 0.0);
  }
}

TEST_CASE("zero output grad gives zero parameter grads") {
  SeededRng rng(3);
  LinearLayer<double> layer("w", rand_t({4, 6}, rng), rand_t({4}, rng));
  LinearCache<double> cache;
  layer.forward(rand_t({2, 6}, rng), &cache);
  auto g = layer.backward(cache, Tensor<double>::zeros({2, 4}));
  for (int64_t i = 0; i < g.weight.numel(); ++i) CHECK(g.weight.at(i) == 0.0);
  for (int64_t i = 0; i < g.bias.numel(); ++i) CHECK(g.bias.at(i) == 0.0);
  for (int64_t i = 0; i < g.input.numel(); ++i) CHECK(g.input.at(i) == 0.0);
}

TEST_CASE("linear gradients match finite differences") {
  SeededRng rng(4);
  for (int inst = 0; inst < 20; ++inst) {
    LinearLayer<double> layer("w", rand_t({3, 5}, rng), rand_t({3}, rng));
    if (inst % 2) {
      randomly_mask(layer.weight, rng, 0.3);
      layer.refresh_effective();
    }
    auto x = rand_t({4, 5}, rng);
    auto r = rand_t({4, 3}, rng);
    LinearCache<double> cache;
    layer.forward(x, &cache);
    auto g = layer.backward(cache, r);

    auto loss_w = [&]() {
      layer.refresh_effective();
      return dot_all(r, layer.forward(x));
    };
    auto rep = check_gradient_fd(g.weight, layer.weight.values, loss_w, 1e-4, 1e-8,
                                 [&](int64_t i) { return !layer.weight.mask.get(i); });
    CHECK(rep.ok);
    CHECK(rep.checked > 0);
    CHECK(check_gradient_fd(g.bias, layer.bias, loss_w).ok);
    Tensor<double>& xref = x;
    auto loss_x = [&]() { return dot_all(r, layer.forward(xref)); };
    CHECK(check_gradient_fd(g.input, xref, loss_x).ok);
  }
}

TEST_CASE("masked linear positions: zero grad, value-independent forward") {
  SeededRng rng(5);
  LinearLayer<double> layer("w", rand_t({4, 4}, rng), rand_t({4}, rng));
  layer.weight.mask.set(5, false);
  layer.weight.mask.set(10, false);
  layer.refresh_effective();
  auto x = rand_t({3, 4}, rng);
  auto y0 = layer.forward(x);

  LinearCache<double> cache;
  layer.forward(x, &cache);
  auto g = layer.backward(cache, rand_t({3, 4}, rng));
  CHECK(g.weight.at(5) == 0.0);
  CHECK(g.weight.at(10) == 0.0);

  // overwrite the stored value at a masked slot: forward is bitwise unchanged
  layer.weight.values.at(5) = 1234.5;
  layer.weight.values.at(10) = -9999.0;
  layer.refresh_effective();
  CHECK(layer.forward(x).bitwise_equal(y0));
}

TEST_CASE("lstm gradients match finite differences") {
  SeededRng rng(6);
  for (int inst = 0; inst < 20; ++inst) {
    const int64_t in = 3, h = 4, B = 2;
    LstmCell<double> cell("w", rand_t({4 * h, in + h}, rng), rand_t({4 * h}, rng), 1.0);
    if (inst % 2) {
      randomly_mask(cell.gate_weight, rng, 0.25);
      cell.refresh_effective();
    }
    auto x = rand_t({B, in}, rng);
    LstmState<double> st{rand_t({B, h}, rng), rand_t({B, h}, rng)};
    auto rh = rand_t({B, h}, rng);
    auto rc = rand_t({B, h}, rng);

    LstmCache<double> cache;
    cell.forward(x, st, &cache);
    auto g = cell.backward(cache, rh, rc);

    auto loss = [&]() {
      cell.refresh_effective();
      auto out = cell.forward(x, st);
      return dot_all(rh, out.h) + dot_all(rc, out.c);
    };
    auto repw = check_gradient_fd(g.weight, cell.gate_weight.values, loss, 1e-4, 1e-8,
                                  [&](int64_t i) { return !cell.gate_weight.mask.get(i); });
    CHECK(repw.ok);
    CHECK(repw.checked > 0);
    CHECK(check_gradient_fd(g.bias, cell.gate_bias, loss).ok);
    CHECK(check_gradient_fd(g.input, x, loss).ok);
    CHECK(check_gradient_fd(g.h_prev, st.h, loss).ok);
    CHECK(check_gradient_fd(g.c_prev, st.c, loss).ok);
  }
}

TEST_CASE("embedding gradients match finite differences") {
  SeededRng rng(7);
  for (int inst = 0; inst < 20; ++inst) {
    EmbeddingLayer<double> emb("t", rand_t({6, 3}, rng));
    if (inst % 2) {
      randomly_mask(emb.table, rng, 0.3);
      emb.refresh_effective();
    }
    std::vector<int32_t> ids{0, 3, 3, 5};
    auto r = rand_t({4, 3}, rng);
    EmbeddingCache<double> cache;
    emb.forward(ids, &cache);
    auto g = emb.backward(cache, r);
    auto loss = [&]() {
      emb.refresh_effective();
      return dot_all(r, emb.forward(ids));
    };
    auto rep = check_gradient_fd(g, emb.table.values, loss, 1e-4, 1e-8,
                                 [&](int64_t i) { return !emb.table.mask.get(i); });
    CHECK(rep.ok);
  }
}

TEST_CASE("embedding rejects out-of-range ids") {
  SeededRng rng(8);
  EmbeddingLayer<double> emb("t", rand_t({4, 2}, rng));
  CHECK_THROWS_AS(emb.forward({0, 4}), IndexError);
  CHECK_THROWS_AS(emb.forward({-1}), IndexError);
}

TEST_CASE("softmax head: uniform logits give ln V") {
  const int64_t V = 7, D = 3;
  SoftmaxXentHead<double> head("p", Tensor<double>::zeros({V, D}), Tensor<double>::zeros({V}));
  SeededRng rng(9);
  auto hidden = rand_t({5, D}, rng);
  double nll = head.forward_loss(hidden, {0, 1, 2, 3, 4});
  CHECK(std::fabs(nll - std::log(double(V))) <= 1e-12);
}

TEST_CASE("softmax head: huge target margin gives near-zero loss") {
  const int64_t V = 5;
  // projection = identity so logits == hidden
  SoftmaxXentHead<double> head("p", Tensor<double>::identity(V), Tensor<double>::zeros({V}));
  Tensor<double> hidden({2, V});
  hidden(0, 1) = 50.0;
  hidden(1, 3) = 50.0;
  double nll = head.forward_loss(hidden, {1, 3});
  CHECK(nll < 1e-6);
  CHECK(nll >= 0.0);
}

TEST_CASE("softmax head distribution sums to one") {
  SeededRng rng(10);
  SoftmaxXentHead<double> head("p", rand_t({9, 4}, rng), rand_t({9}, rng));
  auto probs = head.probabilities(rand_t({6, 4}, rng, 3.0));
  for (int64_t r = 0; r < probs.rows(); ++r) {
    double s = 0;
    for (int64_t j = 0; j < probs.cols(); ++j) s += probs(r, j);
    CHECK(std::fabs(s - 1.0) <= 1e-6);
  }
}

TEST_CASE("softmax head logit gradients match finite differences") {
  // identity projection makes hidden == logits, so the hidden grad is the
  // (softmax - onehot)/N logit gradient
  SeededRng rng(11);
  for (int inst = 0; inst < 20; ++inst) {
    const int64_t V = 6;
    SoftmaxXentHead<double> head("p", Tensor<double>::identity(V), Tensor<double>::zeros({V}));
    auto hidden = rand_t({4, V}, rng, 2.0);
    std::vector<int32_t> targets{1, 0, 5, 2};
    SoftmaxXentCache<double> cache;
    head.forward_loss(hidden, targets, &cache);
    auto g = head.backward(cache);
    auto loss = [&]() { return head.forward_loss(hidden, targets); };
    CHECK(check_gradient_fd(g.hidden, hidden, loss).ok);
  }
}

TEST_CASE("softmax head parameter gradients match finite differences") {
  SeededRng rng(12);
  for (int inst = 0; inst < 20; ++inst) {
    const int64_t V = 6, D = 4;
    SoftmaxXentHead<double> head("p", rand_t({V, D}, rng), rand_t({V}, rng));
    if (inst % 2) {
      randomly_mask(head.projection, rng, 0.3);
      head.refresh_effective();
    }
    auto hidden = rand_t({5, D}, rng);
    std::vector<int32_t> targets{0, 2, 4, 1, 5};
    SoftmaxXentCache<double> cache;
    head.forward_loss(hidden, targets, &cache);
    auto g = head.backward(cache);
    auto loss = [&]() {
      head.refresh_effective();
      return head.forward_loss(hidden, targets);
    };
    auto rep = check_gradient_fd(g.projection, head.projection.values, loss, 1e-4, 1e-8,
                                 [&](int64_t i) { return !head.projection.mask.get(i); });
    CHECK(rep.ok);
    CHECK(check_gradient_fd(g.bias, head.bias, loss).ok);
    CHECK(check_gradient_fd(g.hidden, hidden, loss).ok);
  }
}

TEST_CASE("softmax head rejects out-of-range targets") {
  SeededRng rng(13);
  SoftmaxXentHead<double> head("p", rand_t({4, 3}, rng), rand_t({4}, rng));
  CHECK_THROWS_AS(head.forward_loss(rand_t({1, 3}, rng), {4}), IndexError);
}

TEST_CASE("backward rejects a cache from another layer") {
  SeededRng rng(14);
  LinearLayer<double> a("a", rand_t({2, 2}, rng), rand_t({2}, rng));
  LinearLayer<double> b("b", rand_t({2, 2}, rng), rand_t({2}, rng));
  LinearCache<double> cache;
  a.forward(rand_t({1, 2}, rng), &cache);
  CHECK_THROWS_AS(b.backward(cache, Tensor<double>::zeros({1, 2})), ContractError);
}
