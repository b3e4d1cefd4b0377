#include <doctest.h>

#include <cmath>
#include <numeric>

#include "preqinfo/error.hpp"
#include "preqinfo/numkit.hpp"
#include "preqinfo/rng.hpp"
#include "preqinfo/stats.hpp"

using namespace preqinfo;

TEST_CASE("affine_forward identity and zero input") {
  auto y = affine_forward(std::vector<double>{1, 0}, Matrix::identity(2), std::vector<double>{0, 0});
  CHECK(y == std::vector<double>{1, 0});
  Matrix w(2, 2, std::vector<double>{0.3, -2, 5, 7});
  y = affine_forward(std::vector<double>{0, 0}, w, std::vector<double>{3, -1});
  CHECK(y == std::vector<double>{3, -1});
}

TEST_CASE("affine_forward matches a scalar loop") {
  RngStream rng(4, {"affine"});
  Matrix w(3, 2);
  for (auto& v : w.values()) v = rng.normal();
  std::vector<double> x{rng.normal(), rng.normal()}, b{rng.normal(), rng.normal(), rng.normal()};
  const auto y = affine_forward(x, w, b);
  for (std::size_t r = 0; r < 3; ++r) {
    double acc = b[r];
    for (std::size_t c = 0; c < 2; ++c) acc += w(r, c) * x[c];
    CHECK(y[r] == doctest::Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("affine_forward rejects mismatched dimensions") {
  CHECK_THROWS_AS(affine_forward(std::vector<double>{1, 2, 3}, Matrix::identity(2), std::vector<double>{0, 0}),
                  DimensionError);
}

TEST_CASE("affine and tanh backward match central differences") {
  RngStream rng(9, {"fd"});
  const double h = 1e-5;
  for (int point = 0; point < 20; ++point) {
    std::vector<double> wv(12), x(4), b(3), g(3);
    for (auto& v : wv) v = rng.normal();
    for (auto& v : x) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (auto& v : g) v = rng.normal();
    MatrixView w{wv, 3, 4};
    // scalar objective: g . tanh(Wx + b)
    auto objective = [&](std::span<const double> wvals, std::span<const double> xs) {
      std::vector<double> pre(3), out(3);
      affine_forward(xs, MatrixView{wvals, 3, 4}, b, pre);
      tanh_forward(pre, out);
      return std::inner_product(out.begin(), out.end(), g.begin(), 0.0);
    };
    std::vector<double> pre(3), out(3), gpre(3), gw(12, 0.0), gb(3, 0.0), gx(4, 0.0);
    affine_forward(x, w, b, pre);
    tanh_forward(pre, out);
    tanh_backward(out, g, gpre);
    affine_backward(x, w, gpre, gw, gb, gx);
    for (std::size_t j = 0; j < wv.size(); ++j) {
      auto up = wv, down = wv;
      up[j] += h;
      down[j] -= h;
      const double fd = (objective(up, x) - objective(down, x)) / (2 * h);
      CHECK(std::abs(fd - gw[j]) <= 1e-4 * std::max({std::abs(fd), std::abs(gw[j]), 1e-6}));
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
      auto up = x, down = x;
      up[j] += h;
      down[j] -= h;
      const double fd = (objective(wv, up) - objective(wv, down)) / (2 * h);
      CHECK(std::abs(fd - gx[j]) <= 1e-4 * std::max({std::abs(fd), std::abs(gx[j]), 1e-6}));
    }
  }
}

TEST_CASE("softmax_nll examples") {
  const auto u = softmax_nll(std::vector<double>(10, 0.7), 3);
  CHECK(std::abs(u.loss - std::log(10.0)) <= 1e-12);
  CHECK(softmax_nll(std::vector<double>{30, -30}, 0).loss <= 1e-9);
  const auto r = softmax_nll(std::vector<double>{1, 2, 3}, 1);
  CHECK(r.loss == doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 2.0).epsilon(1e-12));
  const auto p = softmax(std::vector<double>{1, 2, 3});
  CHECK(r.grad_logits[0] == doctest::Approx(p[0]));
  CHECK(r.grad_logits[1] == doctest::Approx(p[1] - 1.0));
  CHECK_THROWS_AS(softmax_nll(std::vector<double>{1, 2}, 2), InvalidArgument);
}

TEST_CASE("softmax_nll clamps tiny probabilities") {
  const auto r = softmax_nll(std::vector<double>{0, 100}, 0);
  CHECK(r.clamped);
  CHECK(r.loss == doctest::Approx(-std::log(kProbabilityFloor)));
}

TEST_CASE("softmax sums to one") {
  RngStream rng(2, {"softmax"});
  for (int i = 0; i < 20; ++i) {
    std::vector<double> logits(7);
    for (auto& v : logits) v = 10 * rng.normal();
    const auto p = softmax(logits);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
  }
}

TEST_CASE("optimizer_step trivial cases") {
  OptimizerHyper sgd{OptimizerKind::SgdMomentum, 0.1, 0.0};
  std::vector<double> params{1.0, -2.0};
  OptimizerState s(sgd, 2);
  optimizer_step(params, std::vector<double>{0, 0}, s);
  CHECK(params == std::vector<double>{1.0, -2.0});

  OptimizerHyper adam;
  adam.learning_rate = 0.0;
  OptimizerState a(adam, 2);
  optimizer_step(params, std::vector<double>{0.5, -3}, a);
  CHECK(params == std::vector<double>{1.0, -2.0});
  CHECK_THROWS_AS(optimizer_step(params, std::vector<double>{1.0}, a), DimensionError);
}

TEST_CASE("sgd on a 1-D quadratic reaches the closed-form minimum") {
  // f(p) = (p - 3)^2 / 2, minimum at 3
  OptimizerHyper sgd{OptimizerKind::SgdMomentum, 0.1, 0.0};
  OptimizerState s(sgd, 1);
  std::vector<double> p{-5.0};
  for (int i = 0; i < 200; ++i) optimizer_step(p, std::vector<double>{p[0] - 3.0}, s);
  CHECK(std::abs(p[0] - 3.0) < 1e-6);
}

TEST_CASE("adam update matches a hand-computed first step") {
  OptimizerHyper adam;
  adam.learning_rate = 0.01;
  OptimizerState s(adam, 1);
  std::vector<double> p{1.0};
  optimizer_step(p, std::vector<double>{2.0}, s);
  // bias-corrected m = g, v = g^2, so the step is lr * g / (|g| + eps)
  CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("ParamVector layout is contiguous") {
  ParamVector pv({{"W", 0, 2, 3}, {"b", 6, 2, 1}});
  CHECK(pv.size() == 8);
  CHECK(pv.block_values("b").size() == 2);
  CHECK_THROWS(ParamVector({{"W", 0, 2, 3}, {"b", 7, 2, 1}}));
}

TEST_CASE("RngStream reproducibility and child independence") {
  RngStream a(42, {"data", "init"}), b(42, {"data", "init"});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream root(42);
  auto c1 = root.child("x"), c2 = root.child("y");
  int same = 0;
  for (int i = 0; i < 100; ++i) same += c1.next_u64() == c2.next_u64();
  CHECK(same == 0);
  CHECK(root.child("x").key() == RngStream(42, {"x"}).key());
}

TEST_CASE("RngStream distributions") {
  RngStream r(5, {"dist"});
  std::vector<double> u, n;
  for (int i = 0; i < 20000; ++i) {
    u.push_back(r.uniform());
    n.push_back(r.normal());
  }
  CHECK(mean(u) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(mean(n)) < 0.03);
  CHECK(sample_sd(n) == doctest::Approx(1.0).epsilon(0.03));
  const auto d = r.dirichlet(5, 0.3);
  CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0));
  auto perm = r.permutation(10);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(perm[i] == i);
}

TEST_CASE("stats helpers") {
  std::vector<double> v{3, 1, 2};
  CHECK(median(v) == 2);
  CHECK(median(std::vector<double>{1, 2, 3, 10}) == 2.5);
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 8, 27}) == doctest::Approx(1.0));
  const auto s = summarize(v);
  CHECK(s.min == 1);
  CHECK(s.max == 3);
  const auto fit = fit_line(std::vector<double>{0, 1, 2}, std::vector<double>{1, 3, 5});
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
}
