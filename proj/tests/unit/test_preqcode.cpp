#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "helpers.hpp"
#include "preqinfo/error.hpp"
#include "preqinfo/preqcode.hpp"

using namespace preqinfo;

namespace {

ModelState zero_softmax(std::size_t d, std::size_t k) {
  auto m = init_model(ModelSpec::softmax_regression(d, k), RngStream(1));
  std::fill(m.params.values().begin(), m.params.values().end(), 0.0);
  return m;
}

PreqConfig frozen_config() {
  PreqConfig cfg;
  cfg.train.optimizer.learning_rate = 0.0;
  cfg.train.max_epochs = 2;
  cfg.first_segment_mode = FirstSegmentMode::Model;
  return cfg;
}

std::vector<std::size_t> sizes(const PartitionSchedule& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.segments(); ++i) out.push_back(s.size(i));
  return out;
}

}  // namespace

TEST_CASE("partition schedule") {
  CHECK(sizes(make_schedule(8, 8, 1.5)) == std::vector<std::size_t>{8});
  CHECK(sizes(make_schedule(100, 8, 1.5)) == std::vector<std::size_t>{8, 12, 18, 27, 35});
  const auto s = make_schedule(100, 8, 1.5, std::vector<std::size_t>{50, 0, 100, 300});
  CHECK(s.is_boundary(50));
  CHECK(s.n() == 100);
  CHECK(s.boundaries.front() == 0);
  CHECK(std::is_sorted(s.boundaries.begin(), s.boundaries.end()));
  CHECK_THROWS(make_schedule(100, 0, 1.5));
}

TEST_CASE("a frozen uniform model costs ln K per example") {
  const auto data = testutil::dense(60, 3, 4, RngStream(2));
  const auto curve = preq_code(zero_softmax(3, 4), data, frozen_config());
  CHECK(curve.total() == doctest::Approx(60 * std::log(4.0)).epsilon(1e-12));

  auto cfg = frozen_config();
  cfg.first_segment_mode = FirstSegmentMode::Uniform;
  CHECK(preq_code(zero_softmax(3, 4), data, cfg).total() == doctest::Approx(60 * std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("a perfect frozen model costs nothing") {
  LabeledDataset data;
  data.inputs = Matrix(40, 1);
  data.num_classes = 2;
  for (std::size_t i = 0; i < 40; ++i) {
    data.inputs(i, 0) = i % 2 ? 1.0 : -1.0;
    data.labels.push_back(i % 2);
  }
  auto m = zero_softmax(1, 2);
  // logits: class 0 gets -50 x, class 1 gets 50 x
  m.params.values()[0] = -50.0;
  m.params.values()[1] = 50.0;
  REQUIRE(predict_log_probs(m, data.input(1))[1] > -1e-12);
  CHECK(preq_code(m, data, frozen_config()).total() <= 40 * 1e-9);
}

TEST_CASE("exact coder small cases") {
  const auto data = testutil::dense(2, 3, 10, RngStream(3));
  auto cfg = frozen_config();
  cfg.first_segment_mode = FirstSegmentMode::Uniform;
  CHECK(preq_exact(zero_softmax(3, 10), data.slice(0, 1), cfg).total() == doctest::Approx(std::log(10.0)));
  CHECK(preq_exact(zero_softmax(3, 10), data, cfg).total() == doctest::Approx(2 * std::log(10.0)));
  CHECK_THROWS(preq_exact(zero_softmax(3, 10), testutil::dense(kPreqExactLimit + 1, 3, 10, RngStream(1)), cfg));
}

TEST_CASE("prefix, suffix and telescoping") {
  const auto g = gen_bigram_corpus(8, 4, 300, 0.1, RngStream(4));
  PreqConfig cfg;
  cfg.seed = 5;
  const auto theta0 = init_model(ModelSpec::bigram_lm(8, 3), RngStream(6));
  const auto curve = preq_code(theta0, g.data, cfg);

  double records = 0.0;
  for (const auto& r : curve.records) records += r.codelength;
  CHECK(std::abs(records - curve.total()) <= 1e-9);
  const double costs = std::accumulate(curve.example_costs.begin(), curve.example_costs.end(), 0.0);
  CHECK(std::abs(costs - curve.total()) <= 1e-9);

  CHECK(curve_prefix(curve, 0) == 0.0);
  CHECK(curve_prefix(curve, 300) == doctest::Approx(curve.total()).epsilon(1e-12));
  const auto& b = curve.schedule.boundaries;
  CHECK(curve_prefix(curve, b[3]) ==
        doctest::Approx(curve.records[0].codelength + curve.records[1].codelength + curve.records[2].codelength)
            .epsilon(1e-12));
  for (std::size_t t : b) CHECK(std::abs(curve_prefix(curve, t) + curve_suffix(curve, t) - curve.total()) <= 1e-9);
  CHECK_THROWS(curve_prefix(curve, b[1] + 1));
  CHECK(curve.clamps() == 0);
}

TEST_CASE("preq_code is deterministic") {
  const auto g = gen_bigram_corpus(6, 3, 120, 0.1, RngStream(7));
  PreqConfig cfg;
  cfg.seed = 9;
  const auto theta0 = init_model(ModelSpec::bigram_lm(6, 2), RngStream(8));
  const auto a = preq_code(theta0, g.data, cfg);
  const auto b = preq_code(theta0, g.data, cfg);
  CHECK(a.example_costs == b.example_costs);
  CHECK(a.total() == b.total());
}

TEST_CASE("partitioned coder stays close to the exact coder") {
  const auto g = gen_bigram_corpus(20, 10, 32, 0.1, RngStream(10));
  PreqConfig cfg;
  cfg.seed = 11;
  const auto theta0 = init_model(ModelSpec::bigram_lm(20, 4), RngStream(12));
  const double approx = preq_code(theta0, g.data, cfg).total();
  const double exact = preq_exact(theta0, g.data, cfg).total();
  CHECK(std::abs(approx - exact) / exact <= 0.10);
}

TEST_CASE("curve CSV round trip") {
  const auto g = gen_bigram_corpus(6, 3, 100, 0.1, RngStream(13));
  PreqConfig cfg;
  const auto curve = preq_code(init_model(ModelSpec::bigram_lm(6, 2), RngStream(1)), g.data, cfg);
  std::stringstream s;
  write_curve_csv(curve, s);
  const auto rows = read_curve_csv(s);
  REQUIRE(rows.size() == curve.records.size());
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].t_start == curve.records[i].t_start);
    CHECK(rows[i].t_end == curve.records[i].t_end);
    total += rows[i].codelength;
  }
  CHECK(total == doctest::Approx(curve.total()).epsilon(1e-12));
}

TEST_CASE("config validation") {
  PreqConfig cfg;
  cfg.growth = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK(parse_first_segment_mode("model") == FirstSegmentMode::Model);
  CHECK_THROWS(parse_first_segment_mode("other"));
}
