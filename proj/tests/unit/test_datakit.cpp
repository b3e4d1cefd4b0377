#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "preqinfo/error.hpp"

using namespace preqinfo;

namespace {

BigramTable table_from(std::vector<std::vector<double>> rows) {
  BigramTable t;
  t.vocab = rows.size();
  t.rows = Matrix(t.vocab, t.vocab);
  for (std::size_t i = 0; i < t.vocab; ++i) {
    for (std::size_t j = 0; j < t.vocab; ++j) t.rows(i, j) = rows[i][j];
    t.free_rows.push_back(i);
  }
  return t;
}

std::vector<double> power_stationary(const Matrix& p) {
  const std::size_t v = p.rows();
  std::vector<double> pi(v, 1.0 / v);
  for (int it = 0; it < 5000; ++it) {
    std::vector<double> next(v, 0.0);
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j) next[j] += pi[i] * p(i, j);
    pi = next;
  }
  return pi;
}

void put_be32(std::ofstream& f, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "preqinfo_datakit_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("bigram corpus") {
  SUBCASE("m = 0 gives uniform rows and no model information") {
    const auto g = gen_bigram_corpus(6, 0, 100, 0.1, RngStream(1));
    const auto& t = std::get<BigramTable>(g.truth);
    for (double p : t.rows.values()) CHECK(p == doctest::Approx(1.0 / 6));
    CHECK(oracle_model_info(g.truth) == 0.0);
    CHECK(g.data.num_classes == 6);
    CHECK(g.data.kind == InputKind::Token);
  }
  SUBCASE("huge concentration gives nearly uniform rows") {
    const auto g = gen_bigram_corpus(10, 10, 10, 1e7, RngStream(2));
    CHECK(oracle_model_info(g.truth) < 1e-4);
  }
  SUBCASE("empirical transition frequencies match the table") {
    const std::size_t v = 20;
    const auto g = gen_bigram_corpus(v, 10, 10000, 0.1, RngStream(3));
    const auto& t = std::get<BigramTable>(g.truth);
    Matrix counts(v, v);
    std::vector<double> ctx(v, 0.0);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      counts(g.data.token(i), g.data.labels[i]) += 1;
      ctx[g.data.token(i)] += 1;
    }
    std::size_t outside = 0;
    for (std::size_t x = 0; x < v; ++x) {
      if (ctx[x] == 0) continue;
      for (std::size_t y = 0; y < v; ++y) {
        const double p = t.rows(x, y);
        const double sigma = std::sqrt(p * (1 - p) / ctx[x]);
        if (std::abs(counts(x, y) / ctx[x] - p) > 3 * sigma + 1.0 / ctx[x]) ++outside;
      }
    }
    CHECK(outside <= 4);
  }
  SUBCASE("determinism and errors") {
    const auto a = gen_bigram_corpus(8, 3, 200, 0.1, RngStream(4));
    const auto b = gen_bigram_corpus(8, 3, 200, 0.1, RngStream(4));
    CHECK(a.data.fingerprint() == b.data.fingerprint());
    CHECK_THROWS_AS(gen_bigram_corpus(8, 9, 10, 0.1, RngStream(1)), InvalidArgument);
    CHECK_THROWS_AS(gen_bigram_corpus(8, 2, 0, 0.1, RngStream(1)), InvalidArgument);
  }
}

TEST_CASE("true conditional entropy") {
  std::vector<std::vector<double>> uniform(20, std::vector<double>(20, 1.0 / 20));
  CHECK(true_conditional_entropy(table_from(uniform)).value == doctest::Approx(std::log(20.0)));

  std::vector<std::vector<double>> cyclic(4, std::vector<double>(4, 0.0));
  for (std::size_t i = 0; i < 4; ++i) cyclic[i][(i + 1) % 4] = 1.0;
  CHECK(std::abs(true_conditional_entropy(table_from(cyclic)).value) <= 1e-12);

  RngStream rng(5, {"table"});
  std::vector<std::vector<double>> rows(5, std::vector<double>(5));
  for (auto& r : rows) {
    double s = 0;
    for (auto& p : r) s += (p = rng.uniform(0.05, 1.0));
    for (auto& p : r) p /= s;
  }
  const auto t = table_from(rows);
  const auto pi = power_stationary(t.rows);
  double expected = 0.0;
  for (std::size_t x = 0; x < 5; ++x)
    for (std::size_t y = 0; y < 5; ++y) expected -= pi[x] * rows[x][y] * std::log(rows[x][y]);
  CHECK(true_conditional_entropy(t).value == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("oracle model information") {
  std::vector<std::vector<double>> rows(20, std::vector<double>(20, 1.0 / 20));
  rows[3].assign(20, 0.0);
  rows[3][7] = 1.0;
  auto t = table_from(rows);
  t.free_rows = {3};
  CHECK(oracle_model_info(t) == doctest::Approx(std::log(20.0)));

  std::vector<std::vector<double>> four{{0.1, 0.2, 0.3, 0.4}, {0.25, 0.25, 0.25, 0.25},
                                        {0.7, 0.1, 0.1, 0.1}, {0.25, 0.25, 0.25, 0.25}};
  auto t4 = table_from(four);
  t4.free_rows = {0, 2};
  double kl = 0.0;
  for (std::size_t r : {0, 2})
    for (double p : four[r]) kl += p * std::log(p / 0.25);
  CHECK(oracle_model_info(t4) == doctest::Approx(kl).epsilon(1e-12));

  GaussianMixture gm;
  CHECK_THROWS_AS(oracle_model_info(gm), InvalidArgument);
}

TEST_CASE("hierarchical classification") {
  const auto g = gen_hier_classification(2, 3, 8, HierGeometry{4.0, 2.0, 1e-6}, 600, RngStream(6));
  CHECK(g.data.num_classes == 6);
  const auto& gm = std::get<GaussianMixture>(g.truth);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    const auto x = g.data.input(i);
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < gm.means.rows(); ++c) {
      double d = 0;
      for (std::size_t j = 0; j < x.size(); ++j) d += std::pow(x[j] - gm.means(c, j), 2);
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == g.data.labels[i];
  }
  CHECK(correct == g.data.size());

  const auto wide = gen_hier_classification(2, 3, 8, HierGeometry{6.0, 1.0, 1.0}, 10, RngStream(7));
  const auto& wgm = std::get<GaussianMixture>(wide.truth);
  RngStream r1(8), r2(8);
  const auto category = bayes_error(wgm, r1, 20000, wgm.category_of);
  const auto fine = bayes_error(wgm, r2, 20000);
  CHECK(category.value < fine.value);

  CHECK_THROWS_AS(gen_hier_classification(2, 3, 8, HierGeometry{1.0, 2.0, 1.0}, 10, RngStream(1)), InvalidArgument);
}

TEST_CASE("label permutation") {
  const auto data = testutil::dense(300, 3, 4, RngStream(9));
  const std::vector<std::size_t> id{0, 1, 2, 3};
  CHECK(apply_label_permutation(data, id).labels == data.labels);

  const auto permuted = permute_labels(data, RngStream(10));
  const auto perm = permuted.meta.at("label_permutation").get<std::vector<std::size_t>>();
  std::vector<std::size_t> inverse(4);
  for (std::size_t i = 0; i < 4; ++i) inverse[perm[i]] = i;
  CHECK(apply_label_permutation(permuted, inverse).labels == data.labels);

  auto sorted_a = data.labels, sorted_b = permuted.labels;
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_b.begin(), sorted_b.end());
  CHECK(std::count(sorted_a.begin(), sorted_a.end(), 0u) ==
        std::count(permuted.labels.begin(), permuted.labels.end(), static_cast<std::uint32_t>(perm[0])));

  // per-class input means follow the relabelling
  for (std::size_t c = 0; c < 4; ++c) {
    double before = 0, after = 0;
    std::size_t nb = 0, na = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == c) before += data.inputs(i, 0), ++nb;
      if (permuted.labels[i] == perm[c]) after += permuted.inputs(i, 0), ++na;
    }
    CHECK(before / nb == doctest::Approx(after / na));
  }
  CHECK_THROWS_AS(apply_label_permutation(data, std::vector<std::size_t>{0, 0, 1, 2}), InvalidArgument);
}

TEST_CASE("label randomization") {
  auto one = testutil::dense(20, 2, 1, RngStream(1));
  CHECK(randomize_labels(one, RngStream(2)).labels == one.labels);

  const auto data = testutil::dense(6000, 2, 3, RngStream(3));
  const auto r = randomize_labels(data, RngStream(4));
  CHECK(r.inputs.values().size() == data.inputs.values().size());
  CHECK(std::equal(r.inputs.values().begin(), r.inputs.values().end(), data.inputs.values().begin()));
  const double expected = data.size() / 3.0;
  const double sigma = std::sqrt(data.size() * (1.0 / 3) * (2.0 / 3));
  for (std::uint32_t c = 0; c < 3; ++c)
    CHECK(std::abs(std::count(r.labels.begin(), r.labels.end(), c) - expected) <= 3 * sigma);

  // plug-in mutual information between sign(x0) and the new label
  double joint[2][3] = {};
  for (std::size_t i = 0; i < r.size(); ++i) joint[r.inputs(i, 0) > 0][r.labels[i]] += 1.0 / r.size();
  double mi = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b) {
      const double pa = joint[a][0] + joint[a][1] + joint[a][2];
      const double pb = joint[0][b] + joint[1][b];
      if (joint[a][b] > 0) mi += joint[a][b] * std::log(joint[a][b] / (pa * pb));
    }
  CHECK(mi < 0.005);
}

TEST_CASE("subtasks") {
  const auto g = gen_hier_classification(std::vector<std::size_t>{2, 3}, 4, HierGeometry{}, 500, RngStream(11));
  const auto& gm = std::get<GaussianMixture>(g.truth);
  const auto all = subtask(g.data, make_filter_task("all", {0, 1, 2, 3, 4}));
  CHECK(all.labels == g.data.labels);
  CHECK(all.fingerprint() == g.data.fingerprint());

  const auto cat = subtask(g.data, make_category_task("cat", gm));
  CHECK(cat.num_classes == 2);
  const auto first = subtask(g.data, make_filter_task("first", {0, 1}));
  const auto second = subtask(g.data, make_filter_task("second", {2, 3, 4}));
  CHECK(first.size() + second.size() == g.data.size());

  const auto outer = make_filter_task("outer", {1, 2, 3});
  const auto inner = make_filter_task("inner", {0, 2});
  const auto twice = subtask(subtask(g.data, outer), inner);
  const auto once = subtask(g.data, compose(outer, inner));
  CHECK(twice.labels == once.labels);
  CHECK(twice.fingerprint() == once.fingerprint());

  CHECK_THROWS_AS(subtask(g.data, TaskSpec{"empty", {}, {}}), InvalidArgument);
}

TEST_CASE("IDX loading") {
  const auto dir = scratch_dir();
  const auto images = dir / "images.idx", labels = dir / "labels.idx";
  {
    std::ofstream f(images, std::ios::binary);
    put_be32(f, 0x00000803);
    put_be32(f, 2);
    put_be32(f, 2);
    put_be32(f, 2);
    const unsigned char px[8] = {0, 255, 51, 102, 255, 0, 0, 153};
    f.write(reinterpret_cast<const char*>(px), 8);
    std::ofstream l(labels, std::ios::binary);
    put_be32(l, 0x00000801);
    put_be32(l, 2);
    const unsigned char ys[2] = {7, 2};
    l.write(reinterpret_cast<const char*>(ys), 2);
  }
  const auto d = load_idx(images, labels);
  REQUIRE(d.size() == 2);
  CHECK(d.input_dim() == 4);
  CHECK(d.labels == std::vector<std::uint32_t>{7, 2});
  const double expected[8] = {0, 1, 0.2, 0.4, 1, 0, 0, 0.6};
  for (std::size_t i = 0; i < 8; ++i) CHECK(d.inputs.values()[i] == doctest::Approx(expected[i]));

  const auto bad = dir / "bad.idx";
  {
    std::ofstream f(bad, std::ios::binary);
    put_be32(f, 0x00000999);
    put_be32(f, 2);
  }
  try {
    load_idx(images, bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::BadMagic);
  }
  const auto three = dir / "three.idx";
  {
    std::ofstream l(three, std::ios::binary);
    put_be32(l, 0x00000801);
    put_be32(l, 3);
    const unsigned char ys[3] = {1, 2, 3};
    l.write(reinterpret_cast<const char*>(ys), 3);
  }
  try {
    load_idx(images, three);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::CountMismatch);
  }
}

TEST_CASE("jsonl round trip") {
  const auto g = gen_bigram_corpus(5, 2, 40, 0.1, RngStream(12));
  std::stringstream s;
  write_jsonl(g.data, s);
  const auto back = read_jsonl(s, 5, InputKind::Token);
  CHECK(back.labels == g.data.labels);
  CHECK(back.fingerprint() == g.data.fingerprint());
}
