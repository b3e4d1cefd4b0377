#include <doctest.h>

#include <cmath>

#include "preqinfo/analysis.hpp"
#include "preqinfo/error.hpp"
#include "preqinfo/infomeasure.hpp"
#include "preqinfo/stats.hpp"

using namespace preqinfo;

namespace {

std::map<std::string, double> all_chains(double v) {
  std::map<std::string, double> m;
  for (const auto& c : dissection_chains()) m[c.name()] = v;
  return m;
}

struct Suite {
  TaskRegistry registry;
  DissectionConfig cfg;
};

Suite small_suite() {
  const auto g = gen_hier_classification(2, 2, 8, HierGeometry{}, 10, RngStream(1, {"gm"}));
  Suite s{hierarchical_suite(std::get<GaussianMixture>(g.truth), 1200, RngStream(1, {"tasks"})), {}};
  s.cfg.spec = ModelSpec::mlp(8, 16, 2);
  s.cfg.seeds = {1};
  return s;
}

}  // namespace

TEST_CASE("chain specs") {
  const auto c = ChainSpec::parse("T_V -> T_A->T_V");
  CHECK(c.tasks == std::vector<std::string>{"T_V", "T_A", "T_V"});
  CHECK(c.name() == "T_V->T_A->T_V");
  CHECK(c.prefix(1).name() == "T_V");
  CHECK_THROWS_AS(ChainSpec::parse("a->b->c->d"), InvalidArgument);
  CHECK_THROWS_AS(ChainSpec::parse("a->"), InvalidArgument);
  CHECK(dissection_chains().size() == 15);

  TaskRegistry r;
  CHECK_THROWS_AS(c.validate(r), MissingOperand);
}

TEST_CASE("identity residuals") {
  auto values = all_chains(1.0);
  values["T_V"] = 1.07;
  values["T_V->T_full"] = 2.23;
  values["T_full"] = 3.53;
  const auto ids = check_identities(values);
  REQUIRE(ids.size() == 7);
  REQUIRE(ids[0].residual.has_value());
  CHECK(*ids[0].residual == doctest::Approx(std::abs(1.07 + 2.23 - 3.53) / 3.53));
  CHECK(*ids[0].residual == doctest::Approx(0.065).epsilon(0.01));
  CHECK(ids[0].within_tolerance);

  const auto zero = check_identities(all_chains(0.0));
  for (const auto& r : zero) {
    CHECK_FALSE(r.residual.has_value());
    CHECK_FALSE(r.within_tolerance);
  }

  values.erase("T_full");
  CHECK_THROWS_AS(check_identities(values), MissingOperand);
}

TEST_CASE("Venn decomposition") {
  auto values = all_chains(1.0);
  values["T_A"] = 2.18;
  values["T_V->T_A"] = 1.45;
  values["T_V"] = 1.07;
  values["T_A->T_V"] = 0.5;
  const auto v = venn_decompose(values);
  CHECK(v.shared == doctest::Approx(0.73));
  CHECK(v.shared / values["T_A"] == doctest::Approx(0.25).epsilon(0.4));
  CHECK(v.shared_alt == doctest::Approx(0.57));
  CHECK(v.category == 1.0);

  auto same = all_chains(0.0);
  same["T_V"] = same["T_A"] = 2.0;
  same["T_V->T_A"] = same["T_A->T_V"] = 0.0;
  const auto s = venn_decompose(same);
  CHECK(s.shared == 2.0);
  CHECK(s.specific_v == 0.0);
  CHECK(s.specific_a == 0.0);
  CHECK(s.shared_gap == 0.0);

  auto negative = all_chains(1.0);
  negative["T_V->T_A"] = 3.0;
  CHECK(venn_decompose(negative).shared == 0.0);
  CHECK_FALSE(venn_decompose(negative).clipped.empty());
}

TEST_CASE("hierarchical suite layout") {
  const auto s = small_suite();
  CHECK(s.registry.get("T_full").num_classes == 4);
  CHECK(s.registry.get("T_VA").num_classes == 2);
  CHECK(s.registry.get("T_V").size() + s.registry.get("T_A").size() == s.registry.get("T_full").size());
  CHECK(s.registry.get("T_V", 0).fingerprint() != s.registry.get("T_V", 1).fingerprint());
  CHECK(hop_split(s.cfg, 300) == std::pair<std::size_t, std::size_t>{200, 100});
  CHECK_THROWS(hop_split(s.cfg, 1));
}

TEST_CASE("single-task chain is a plain L_IT measurement") {
  const auto s = small_suite();
  ChainCache cache;
  const double chained = run_chain(ChainSpec::parse("T_V"), s.registry, s.cfg, 1, cache);

  const auto& data = s.registry.get("T_V");
  const auto [n, k] = hop_split(s.cfg, data.size());
  const RngStream root(1, {"dissect"});
  auto theta0 = init_model(s.cfg.spec.with_outputs(data.num_classes), root.child("init"));
  theta0 = reset_head(theta0, HeadStrategy::Separate, s.registry.id("T_V"), root, data.num_classes);
  PreqConfig pc = s.cfg.preq;
  pc.seed = root.child("preq").child("T_V").key();
  CHECK(chained == information_transfer(theta0, data, n, k, pc).value);

  CHECK(run_chain(ChainSpec::parse("T_V"), s.registry, s.cfg, 1, cache) == chained);
  CHECK(cache.hits() >= 1);
}

TEST_CASE("a two-task chain measures from the first task's model") {
  const auto s = small_suite();
  ChainCache cache;
  const double chained = run_chain(ChainSpec::parse("T_V->T_A"), s.registry, s.cfg, 2, cache);

  const RngStream root(2, {"dissect"});
  const auto first = chain_model(ChainSpec::parse("T_V"), s.registry, s.cfg, 2, cache);
  CHECK(first.trained());
  const auto& data = s.registry.get("T_A", 1);
  const auto [n, k] = hop_split(s.cfg, data.size());
  const auto theta0 = reset_head(first, HeadStrategy::Separate, s.registry.id("T_A"), root, data.num_classes);
  PreqConfig pc = s.cfg.preq;
  pc.seed = root.child("preq").child("T_V->T_A").key();
  CHECK(chained == information_transfer(theta0, data, n, k, pc).value);
}

// L_IT codes different slices in its two terms, so at this size the slice-to-slice
// spread of a converged model's loss is comparable to L(T) itself.
TEST_CASE("repeating a task adds little new information" * doctest::may_fail()) {
  const auto s = small_suite();
  ChainCache cache;
  std::vector<double> once, twice;
  for (std::uint64_t seed : {1, 2, 3}) {
    once.push_back(run_chain(ChainSpec::parse("T_full"), s.registry, s.cfg, seed, cache));
    twice.push_back(run_chain(ChainSpec::parse("T_full->T_full"), s.registry, s.cfg, seed, cache));
  }
  CHECK(median(once) > 0.0);
  CHECK(std::abs(median(twice)) <= 0.05 * median(once));
}
