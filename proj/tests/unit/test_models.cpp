#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "helpers.hpp"
#include "preqinfo/error.hpp"
#include "preqinfo/models.hpp"

using namespace preqinfo;

namespace {

bool same_values(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

double gradient_error(const ModelSpec& spec, RngStream rng) {
  auto m = init_model(spec, rng.child("init"));
  for (auto& v : m.params.values()) v += 0.3 * rng.normal();
  std::vector<double> x;
  if (spec.kind == ModelKind::BigramLm) {
    x.push_back(static_cast<double>(rng.below(spec.input_dim)));
  } else {
    for (std::size_t i = 0; i < spec.input_dim; ++i) x.push_back(rng.normal());
  }
  const std::size_t y = rng.below(spec.outputs);
  Workspace ws;
  bool clamped = false;
  std::vector<double> g(m.params.size(), 0.0);
  example_loss_grad(m, x, y, g, ws, false, &clamped);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t j = 0; j < g.size(); ++j) {
    auto vals = m.params.values();
    const double keep = vals[j];
    vals[j] = keep + h;
    const double up = example_loss_grad(m, x, y, {}, ws, false, &clamped);
    vals[j] = keep - h;
    const double down = example_loss_grad(m, x, y, {}, ws, false, &clamped);
    vals[j] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[j]) / std::max({std::abs(fd), std::abs(g[j]), 1e-6}));
  }
  return worst;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(ModelSpec::softmax_regression(4, 3).param_count() == 15);
  CHECK(ModelSpec::mlp(4, 5, 3).param_count() == 4 * 5 + 5 + 5 * 3 + 3);
  const auto b = ModelSpec::bigram_lm(20, 4);
  CHECK(b.outputs == 20);
  CHECK(b.param_count() == 20 * 4 + 4 * 20 + 20);
  CHECK(init_model(b, RngStream(1)).params.size() == b.param_count());
  CHECK_THROWS_AS(ModelSpec::mlp(4, 0, 3).validate(), InvalidArgument);
}

TEST_CASE("init is deterministic") {
  const auto spec = ModelSpec::mlp(6, 8, 4);
  const auto a = init_model(spec, RngStream(7, {"init"}));
  const auto b = init_model(spec, RngStream(7, {"init"}));
  CHECK(same_values(a.params.values(), b.params.values()));
  CHECK_FALSE(same_values(a.params.values(), init_model(spec, RngStream(8, {"init"})).params.values()));
  CHECK_FALSE(a.trained());
}

TEST_CASE("fresh init predicts near uniformly") {
  const auto data = testutil::dense(2000, 16, 10, RngStream(1, {"inputs"}));
  for (const auto& spec : {ModelSpec::softmax_regression(16, 10), ModelSpec::mlp(16, 32, 10)}) {
    const auto m = init_model(spec, RngStream(3));
    CHECK(std::abs(mean_nll(m, data) - std::log(10.0)) <= 0.05 * std::log(10.0));
  }
}

TEST_CASE("predict_log_probs") {
  auto zero = init_model(ModelSpec::softmax_regression(3, 4), RngStream(1));
  std::fill(zero.params.values().begin(), zero.params.values().end(), 0.0);
  for (double lp : predict_log_probs(zero, std::vector<double>{0.5, -1, 2})) CHECK(lp == doctest::Approx(-std::log(4.0)));

  const auto bigram = init_model(ModelSpec::bigram_lm(7, 3), RngStream(2));
  for (double tok = 0; tok < 7; ++tok) {
    const auto lp = predict_log_probs(bigram, std::vector<double>{tok});
    double s = 0.0;
    for (double v : lp) s += std::exp(v);
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  CHECK_THROWS(predict_log_probs(zero, std::vector<double>{1, 2}));
}

TEST_CASE("training raises the log-probability of training points") {
  const auto data = testutil::separable(200, RngStream(5));
  const auto m0 = init_model(ModelSpec::softmax_regression(2, 2), RngStream(6));
  TrainConfig tc;
  const auto m1 = train(m0, data, tc);
  const auto x = data.input(0);
  CHECK(predict_log_probs(m1, x)[data.labels[0]] > predict_log_probs(m0, x)[data.labels[0]]);
  CHECK(accuracy(m1, data) == 1.0);
  CHECK(m1.trained());
}

TEST_CASE("train edge cases") {
  const auto data = testutil::separable(100, RngStream(5));
  const auto m0 = init_model(ModelSpec::softmax_regression(2, 2), RngStream(6));
  TrainConfig tc;
  tc.max_epochs = 0;
  CHECK(same_values(train(m0, data, tc).params.values(), m0.params.values()));

  LabeledDataset empty;
  empty.inputs = Matrix(0, 2);
  empty.num_classes = 2;
  CHECK_THROWS(train(m0, empty, TrainConfig{}));
  CHECK_THROWS_AS(train(m0, testutil::dense(20, 3, 2, RngStream(1)), TrainConfig{}), IncompatibleError);
}

TEST_CASE("infinite penalty freezes parameters") {
  const auto data = testutil::separable(200, RngStream(5));
  const auto m0 = init_model(ModelSpec::mlp(2, 4, 2), RngStream(6));
  TrainConfig tc;
  tc.penalty = PenaltyTerm{{m0.params.values().begin(), m0.params.values().end()},
                           std::vector<double>(m0.params.size(), 1.0), 1e9};
  const auto m1 = train(m0, data, tc);
  for (std::size_t i = 0; i < m0.params.size(); ++i)
    CHECK(std::abs(m1.params.values()[i] - m0.params.values()[i]) <= 1e-3);
}

TEST_CASE("train is deterministic") {
  const auto data = testutil::dense(300, 4, 3, RngStream(9));
  const auto m0 = init_model(ModelSpec::mlp(4, 6, 3), RngStream(1));
  TrainConfig tc;
  tc.shuffle_seed = 11;
  CHECK(same_values(train(m0, data, tc).params.values(), train(m0, data, tc).params.values()));
}

TEST_CASE("fit returns the best heldout snapshot") {
  const auto data = testutil::dense(300, 4, 3, RngStream(9));
  const auto m0 = init_model(ModelSpec::mlp(4, 16, 3), RngStream(1));
  const auto out = fit(m0, data, TrainConfig{});
  CHECK(out.heldout_size == TrainConfig{}.heldout_size(300));
  CHECK(out.best_epoch <= out.epochs_run);
}

TEST_CASE("mean_nll") {
  auto zero = init_model(ModelSpec::softmax_regression(5, 10), RngStream(1));
  std::fill(zero.params.values().begin(), zero.params.values().end(), 0.0);
  const auto data = testutil::dense(50, 5, 10, RngStream(2));
  CHECK(mean_nll(zero, data) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  const auto m = init_model(ModelSpec::mlp(5, 4, 10), RngStream(3));
  CHECK(mean_nll(m, data) == mean_nll(m, data));
  LabeledDataset empty;
  empty.inputs = Matrix(0, 5);
  empty.num_classes = 10;
  CHECK_THROWS(mean_nll(m, empty));
}

TEST_CASE("gradients match central differences for every model kind") {
  RngStream rng(17, {"grad"});
  for (int p = 0; p < 20; ++p) {
    CHECK(gradient_error(ModelSpec::softmax_regression(4, 3), rng.child("s").child(p)) <= 1e-4);
    CHECK(gradient_error(ModelSpec::mlp(4, 5, 3), rng.child("m").child(p)) <= 1e-4);
    CHECK(gradient_error(ModelSpec::bigram_lm(6, 3), rng.child("b").child(p)) <= 1e-4);
  }
}

TEST_CASE("penalty gradient matches finite differences") {
  RngStream rng(3, {"pen"});
  PenaltyTerm p;
  std::vector<double> theta;
  for (int i = 0; i < 30; ++i) {
    theta.push_back(rng.normal());
    p.anchor.push_back(rng.normal());
    p.weights.push_back(rng.uniform(0.0, 3.0));
  }
  p.coefficient = 2.5;
  double direct = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) direct += 0.5 * p.coefficient * p.weights[j] * std::pow(theta[j] - p.anchor[j], 2);
  CHECK(penalty_value(theta, p) == doctest::Approx(direct).epsilon(1e-12));
  std::vector<double> g(theta.size(), 0.0);
  penalty_gradient(theta, p, g);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    auto up = theta, down = theta;
    up[j] += 1e-5;
    down[j] -= 1e-5;
    const double fd = (penalty_value(up, p) - penalty_value(down, p)) / 2e-5;
    CHECK(std::abs(fd - g[j]) <= 1e-4 * std::max({std::abs(fd), std::abs(g[j]), 1e-6}));
  }
}

TEST_CASE("reset_head strategies") {
  const auto spec = ModelSpec::mlp(4, 5, 3);
  auto m = reset_head(init_model(spec, RngStream(1)), HeadStrategy::Separate, 0, RngStream(2));
  const auto body = std::vector<double>(m.body().begin(), m.body().end());

  SUBCASE("separate keeps the body and re-initialises the head") {
    const auto s = reset_head(m, HeadStrategy::Separate, 1, RngStream(2));
    CHECK(same_values(s.body(), body));
    CHECK_FALSE(same_values(s.head_values(), m.head_values()));
    CHECK(s.parked_heads.count(0) == 1);
    const auto back = reset_head(s, HeadStrategy::Separate, 0, RngStream(2));
    CHECK(same_values(back.head_values(), m.head_values()));
  }
  SUBCASE("reuse changes nothing") {
    const auto r = reset_head(m, HeadStrategy::Reuse, 1, RngStream(2));
    CHECK(same_values(r.params.values(), m.params.values()));
  }
  SUBCASE("union over two 3-class tasks") {
    auto u = reset_head(init_model(spec, RngStream(1)), HeadStrategy::Union, 0, RngStream(2));
    const auto first = std::vector<double>(u.head_values().begin(), u.head_values().end());
    u = reset_head(u, HeadStrategy::Union, 1, RngStream(2), 3);
    CHECK(u.spec.outputs == 6);
    const std::size_t fan = spec.head_inputs();
    auto head = u.head_values();
    for (std::size_t i = 0; i < 3 * fan; ++i) CHECK(head[i] == first[i]);
    for (std::size_t r = 0; r < 3; ++r) CHECK(head[6 * fan + r] == first[3 * fan + r]);
    CHECK(same_values(u.body(), body));
    CHECK(task_view(u, 0).spec.outputs == 3);

    LabeledDataset d = testutil::dense(5, 4, 3, RngStream(4));
    const auto relabelled = to_union_labels(u, 1, d);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(relabelled.labels[i] == d.labels[i] + 3);
  }
}

TEST_CASE("checkpoint round trip") {
  auto m = init_model(ModelSpec::mlp(3, 4, 2), RngStream(1));
  m = reset_head(m, HeadStrategy::Separate, 0, RngStream(2));
  m = reset_head(m, HeadStrategy::Separate, 1, RngStream(2));
  std::stringstream s;
  write_checkpoint(m, s);
  const auto r = read_checkpoint(s);
  CHECK(r.spec == m.spec);
  CHECK(same_values(r.params.values(), m.params.values()));
  CHECK(r.parked_heads.size() == 1);
  CHECK(r.fingerprint() == m.fingerprint());

  std::stringstream bad("not a checkpoint");
  CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
}

TEST_CASE("trained flag follows lineage") {
  const auto data = testutil::separable(60, RngStream(1));
  const auto m0 = init_model(ModelSpec::softmax_regression(2, 2), RngStream(2));
  CHECK_FALSE(m0.trained());
  CHECK(train(m0, data, TrainConfig{}).trained());
  CHECK(fit(m0, data, TrainConfig{}, "segment 3").model.trained());
  CHECK(reset_head(train(m0, data, TrainConfig{}), HeadStrategy::Separate, 1, RngStream(3)).trained());
}
