#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "preqinfo/continual.hpp"
#include "preqinfo/error.hpp"

using namespace preqinfo;

namespace {

bool same_values(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

ContinualConfig tiny_config() {
  ContinualConfig cfg;
  cfg.spec = ModelSpec::mlp(6, 12, 2);
  cfg.train_size = 200;
  cfg.k = 100;
  cfg.future_train_size = 100;
  cfg.seed = 3;
  return cfg;
}

TaskSuite tiny_suite() {
  BlobSuiteSpec spec;
  spec.tasks = 2;
  spec.classes_per_task = 2;
  spec.blobs_per_class = 1;
  spec.input_dim = 6;
  spec.examples_per_task = 300;
  return blob_task_suite(spec, RngStream(4, {"suite"}));
}

}  // namespace

TEST_CASE("IMM merge") {
  const auto spec = ModelSpec::mlp(3, 4, 2);
  const auto a = init_model(spec, RngStream(1));
  const auto b = init_model(spec, RngStream(2));
  std::vector<ModelState> same{a, a, a};
  CHECK(same_values(imm_merge(same, {}, ImmMerge::Mean).params.values(), a.params.values()));

  std::vector<ModelState> pair{a, b};
  const std::vector<double> first{1.0, 0.0};
  CHECK(same_values(imm_merge(pair, {}, ImmMerge::Mean, first).params.values(), a.params.values()));

  const auto mean = imm_merge(pair, {}, ImmMerge::Mean);
  for (std::size_t j = 0; j < a.params.size(); ++j)
    CHECK(mean.params.values()[j] == doctest::Approx(0.5 * (a.params.values()[j] + b.params.values()[j])));

  FisherDiag flat;
  flat.values.assign(a.params.size(), 100.0);
  std::vector<FisherDiag> fishers{flat, flat};
  const auto mode = imm_merge(pair, fishers, ImmMerge::Mode);
  for (std::size_t j = 0; j < a.params.size(); ++j)
    CHECK(std::abs(mode.params.values()[j] - mean.params.values()[j]) <= 1e-9);

  // a coordinate only one model is confident about follows that model
  auto skew = fishers;
  skew[1].values[0] = 0.0;
  CHECK(imm_merge(pair, skew, ImmMerge::Mode).params.values()[0] == doctest::Approx(a.params.values()[0]));
  CHECK_THROWS(imm_merge(pair, {}, ImmMerge::Mode));
}

TEST_CASE("Fisher of a two-class logistic model") {
  auto m = init_model(ModelSpec::softmax_regression(1, 2), RngStream(5));
  m.params.values()[0] = 0.8;
  m.params.values()[1] = -0.4;
  m.params.values()[2] = 0.3;
  m.params.values()[3] = 0.0;
  const auto data = testutil::dense(50, 1, 2, RngStream(6));

  double fw = 0.0, fb = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto lp = predict_log_probs(m, data.input(i));
    const double p = std::exp(lp[0]);
    const double x = data.inputs(i, 0);
    fw += p * (1 - p) * x * x / data.size();
    fb += p * (1 - p) / data.size();
  }
  auto f = estimate_fisher(m, data, 40000, RngStream(7)).values;
  std::sort(f.begin(), f.end());
  std::vector<double> expected{fw, fw, fb, fb};
  std::sort(expected.begin(), expected.end());
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(f[j] - expected[j]) <= 0.05 * expected[j]);
}

TEST_CASE("Fisher estimates shrink in variance with more samples") {
  const auto m = init_model(ModelSpec::softmax_regression(2, 3), RngStream(8));
  const auto data = testutil::dense(100, 2, 3, RngStream(9));
  auto spread = [&](std::size_t samples) {
    std::vector<double> v;
    for (int r = 0; r < 40; ++r) v.push_back(estimate_fisher(m, data, samples, RngStream(10, {"rep"}).child(r)).values[0]);
    double mean = 0, var = 0;
    for (double x : v) mean += x / v.size();
    for (double x : v) var += (x - mean) * (x - mean) / (v.size() - 1);
    return var;
  };
  const double ratio = spread(400) / spread(200);
  CHECK(ratio > 0.25);
  CHECK(ratio < 0.9);
}

TEST_CASE("train_task penalties") {
  const auto suite = tiny_suite();
  const auto m0 = init_model(ModelSpec::mlp(6, 12, 2), RngStream(11));
  const auto first = train(m0, suite.tasks[0], TrainConfig{});
  Anchor anchor{{first.params.values().begin(), first.params.values().end()},
                std::vector<double>(first.params.size(), 1.0)};
  TrainConfig tc;
  tc.shuffle_seed = 12;

  const auto plain = train_task(first, suite.tasks[1], MethodSpec::plain(), std::nullopt, tc);
  const auto ewc0 = train_task(first, suite.tasks[1], MethodSpec::ewc(0.0), anchor, tc);
  CHECK(same_values(plain.params.values(), ewc0.params.values()));

  const auto l2 = train_task(first, suite.tasks[1], MethodSpec::l2(1.0), anchor, tc);
  CHECK(distance(l2.params.values(), anchor.params) < distance(plain.params.values(), anchor.params));

  Anchor stiff = anchor;
  stiff.weights = estimate_fisher(first, suite.tasks[0], 200, RngStream(13)).values;
  for (auto& w : stiff.weights) w = std::max(w, 1e-3);
  const auto frozen = train_task(first, suite.tasks[1], MethodSpec::ewc(1e9), stiff, tc);
  const auto body = frozen.body();
  for (std::size_t j = 0; j < body.size(); ++j) CHECK(std::abs(body[j] - anchor.params[j]) <= 1e-3);
}

TEST_CASE("ratio of information kept") {
  ContinualResult r;
  r.tasks.resize(3);
  r.tasks[0].lia = 50.0;
  r.tasks[1].lia = 300.0;
  r.tasks[2].lia = -10.0;
  const std::vector<double> refs{100.0, 200.0, 100.0};
  const auto k = ratio_kept(r, refs);
  CHECK(k.ratio == std::vector<double>{0.5, 1.1, 0.0});
  CHECK(k.clipped == std::vector<bool>{false, true, true});
  CHECK_THROWS(ratio_kept(r, std::vector<double>{1.0, 0.0, 1.0}));
}

TEST_CASE("method validation") {
  CHECK_THROWS_AS(MethodSpec::l2(-1.0).validate(2), InvalidArgument);
  CHECK_THROWS(MethodSpec::imm(ImmMerge::Mean, ImmTransfer::Weight, 0.0, {0.5, 0.5, 0.0}).validate(2));
  CHECK(MethodSpec::ewc(1.0).needs_fisher());
  CHECK_FALSE(MethodSpec::plain().needs_fisher());
}

TEST_CASE("blob task suite") {
  const auto suite = tiny_suite();
  REQUIRE(suite.tasks.size() == 2);
  for (const auto& t : suite.tasks) {
    CHECK(t.size() == 300);
    CHECK(t.num_classes == 2);
  }
  CHECK(suite.future.num_classes >= 2);
  CHECK(tiny_suite().tasks[1].fingerprint() == suite.tasks[1].fingerprint());
}

TEST_CASE("sequence runs are deterministic and head retraining does not hurt") {
  const auto suite = tiny_suite();
  const auto cfg = tiny_config();
  const auto a = run_sequence_full(suite.tasks, suite.future, MethodSpec::plain(), HeadStrategy::Separate, cfg);
  const auto b = run_sequence_full(suite.tasks, suite.future, MethodSpec::plain(), HeadStrategy::Separate, cfg);
  CHECK(a.result.to_json() == b.result.to_json());
  CHECK(a.result.tasks.size() == 2);
  CHECK(a.result.reference_lit.size() == 2);

  const auto own = retrain_head(a.final_model, 1, suite.tasks[1], cfg.train_size, cfg.train);
  CHECK(own.after >= own.before - 0.02);
}
