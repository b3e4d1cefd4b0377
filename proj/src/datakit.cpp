#include "preqinfo/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "preqinfo/error.hpp"

namespace preqinfo {

// ---- LabeledDataset -------------------------------------------------------

LabeledDataset LabeledDataset::slice(std::size_t begin, std::size_t end) const {
  PREQINFO_CHECK(begin <= end && end <= size(), InvalidArgument, "slice out of range");
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  auto out = select(idx);
  out.meta["slice"] = {begin, end};
  return out;
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.kind = kind;
  out.num_classes = num_classes;
  out.meta = meta;
  out.inputs = Matrix(indices.size(), input_dim());
  out.labels.reserve(indices.size());
  out.order.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    PREQINFO_CHECK(i < size(), InvalidArgument, "select index out of range");
    auto src = input(i);
    std::copy(src.begin(), src.end(), out.inputs.row(r).begin());
    out.labels.push_back(labels[i]);
    out.order.push_back(order.empty() ? i : order[i]);
  }
  return out;
}

void LabeledDataset::validate() const {
  PREQINFO_CHECK(inputs.rows() == labels.size(), DimensionError, "dataset input and label counts differ");
  for (auto y : labels) PREQINFO_CHECK(y < num_classes, InvalidArgument, "dataset label exceeds K");
  PREQINFO_CHECK(all_finite(inputs.values()), InvalidArgument, "dataset inputs contain non-finite values");
  if (kind == InputKind::Token) PREQINFO_CHECK(input_dim() == 1, DimensionError, "token datasets have one column");
}

std::uint64_t LabeledDataset::fingerprint() const {
  std::uint64_t h = fnv1a64(std::string_view(reinterpret_cast<const char*>(inputs.values().data()),
                                             inputs.values().size() * sizeof(double)));
  h = fnv1a64(std::string_view(reinterpret_cast<const char*>(labels.data()), labels.size() * sizeof(std::uint32_t)),
              h);
  const std::uint64_t k = num_classes;
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(&k), sizeof k), h);
}

LabeledDataset concat(std::span<const LabeledDataset> parts) {
  PREQINFO_CHECK(!parts.empty(), InvalidArgument, "concat of nothing");
  LabeledDataset out;
  out.kind = parts[0].kind;
  out.num_classes = 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    PREQINFO_CHECK(p.input_dim() == parts[0].input_dim() && p.kind == parts[0].kind, IncompatibleError,
                   "concat: input shapes differ");
    rows += p.size();
    out.num_classes = std::max(out.num_classes, p.num_classes);
  }
  out.inputs = Matrix(rows, parts[0].input_dim());
  std::size_t r = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i, ++r) {
      auto src = p.input(i);
      std::copy(src.begin(), src.end(), out.inputs.row(r).begin());
      out.labels.push_back(p.labels[i]);
      out.order.push_back(r);
    }
  }
  out.meta["generator"] = "concat";
  out.meta["parts"] = parts.size();
  return out;
}

// ---- true models ----------------------------------------------------------

std::size_t true_model_classes(const TrueModel& tm) {
  if (const auto* b = std::get_if<BigramTable>(&tm)) return b->vocab;
  return std::get<GaussianMixture>(tm).means.rows();
}

namespace {

std::vector<double> mixture_log_posterior(const GaussianMixture& gm, std::span<const double> x) {
  const std::size_t c = gm.means.rows();
  std::vector<double> logits(c);
  for (std::size_t k = 0; k < c; ++k) {
    auto mu = gm.means.row(k);
    double d2 = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) d2 += (x[j] - mu[j]) * (x[j] - mu[j]);
    logits[k] = std::log(gm.class_prior[k]) - d2 / (2.0 * gm.variance);
  }
  const double lse = log_sum_exp(logits);
  for (auto& v : logits) v -= lse;
  return logits;
}

double row_entropy(std::span<const double> row) {
  double h = 0.0;
  for (double p : row) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<double> sample_mixture_point(const GaussianMixture& gm, std::size_t cls, RngStream& rng) {
  auto mu = gm.means.row(cls);
  const double sd = std::sqrt(gm.variance);
  std::vector<double> x(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) x[j] = mu[j] + sd * rng.normal();
  return x;
}

}  // namespace

double true_log_prob(const TrueModel& tm, std::span<const double> input, std::size_t label) {
  if (const auto* b = std::get_if<BigramTable>(&tm)) {
    const auto ctx = static_cast<std::size_t>(input[0]);
    PREQINFO_CHECK(ctx < b->vocab && label < b->vocab, InvalidArgument, "bigram token out of range");
    return std::log(b->rows(ctx, label));
  }
  const auto& gm = std::get<GaussianMixture>(tm);
  PREQINFO_CHECK(label < gm.means.rows(), InvalidArgument, "mixture label out of range");
  return mixture_log_posterior(gm, input)[label];
}

std::vector<double> stationary_distribution(const Matrix& rows) {
  const std::size_t v = rows.rows();
  std::vector<double> p(v, 1.0 / static_cast<double>(v)), next(v);
  // lazy chain (P + I)/2 shares the stationary law and is aperiodic
  for (int it = 0; it < 200000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < v; ++i) {
      next[i] += 0.5 * p[i];
      for (std::size_t j = 0; j < v; ++j) next[j] += 0.5 * p[i] * rows(i, j);
    }
    double diff = 0.0, total = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      diff += std::abs(next[j] - p[j]);
      total += next[j];
    }
    for (std::size_t j = 0; j < v; ++j) p[j] = next[j] / total;
    if (diff < 1e-15) break;
  }
  return p;
}

Estimate true_conditional_entropy(const TrueModel& tm, RngStream* rng, std::size_t samples) {
  if (const auto* b = std::get_if<BigramTable>(&tm)) {
    const auto pi = stationary_distribution(b->rows);
    double h = 0.0;
    for (std::size_t i = 0; i < b->vocab; ++i) h += pi[i] * row_entropy(b->rows.row(i));
    return {h, 0.0};
  }
  const auto& gm = std::get<GaussianMixture>(tm);
  PREQINFO_CHECK(rng != nullptr && samples > 1, InvalidArgument, "mixture entropy needs an rng and samples > 1");
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t y = rng->categorical(gm.class_prior);
    const auto x = sample_mixture_point(gm, y, *rng);
    const double c = -mixture_log_posterior(gm, x)[y];
    sum += c;
    sum2 += c * c;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 / n - mean * mean) * n / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

double oracle_model_info(const TrueModel& tm) {
  const auto* b = std::get_if<BigramTable>(&tm);
  PREQINFO_CHECK(b != nullptr, InvalidArgument, "oracle_model_info requires a bigram table");
  const double log_v = std::log(static_cast<double>(b->vocab));
  double info = 0.0;
  for (auto r : b->free_rows) info += log_v - row_entropy(b->rows.row(r));
  return info;
}

Estimate bayes_error(const GaussianMixture& gm, RngStream& rng, std::size_t samples,
                     std::span<const std::size_t> label_map) {
  PREQINFO_CHECK(samples > 1, InvalidArgument, "bayes_error needs samples > 1");
  const std::size_t c = gm.means.rows();
  std::size_t groups = c;
  if (!label_map.empty()) {
    PREQINFO_CHECK(label_map.size() == c, DimensionError, "label map must cover every class");
    groups = *std::max_element(label_map.begin(), label_map.end()) + 1;
  }
  std::size_t errors = 0;
  std::vector<double> mass(groups);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t y = rng.categorical(gm.class_prior);
    const auto x = sample_mixture_point(gm, y, rng);
    const auto lp = mixture_log_posterior(gm, x);
    std::fill(mass.begin(), mass.end(), 0.0);
    for (std::size_t k = 0; k < c; ++k) mass[label_map.empty() ? k : label_map[k]] += std::exp(lp[k]);
    const auto guess = static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
    if (guess != (label_map.empty() ? y : label_map[y])) ++errors;
  }
  const double n = static_cast<double>(samples);
  const double p = static_cast<double>(errors) / n;
  return {p, std::sqrt(p * (1.0 - p) / n)};
}

// ---- generators -----------------------------------------------------------

GeneratedData gen_bigram_corpus(std::size_t vocab, std::size_t free_rows, std::size_t n, double alpha,
                                RngStream rng) {
  PREQINFO_CHECK(vocab >= 1, InvalidArgument, "bigram corpus needs V >= 1");
  PREQINFO_CHECK(free_rows <= vocab, InvalidArgument, "free row count m must satisfy 0 <= m <= V");
  PREQINFO_CHECK(n >= 1, InvalidArgument, "bigram corpus needs n >= 1");
  PREQINFO_CHECK(alpha > 0.0 && std::isfinite(alpha), InvalidArgument, "Dirichlet concentration must be positive");

  BigramTable table;
  table.vocab = vocab;
  table.rows = Matrix(vocab, vocab, 1.0 / static_cast<double>(vocab));
  auto row_rng = rng.child("rows");
  auto perm = row_rng.permutation(vocab);
  table.free_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(free_rows));
  std::sort(table.free_rows.begin(), table.free_rows.end());
  for (auto r : table.free_rows) {
    auto draw = row_rng.child(r).dirichlet(vocab, alpha);
    std::copy(draw.begin(), draw.end(), table.rows.row(r).begin());
  }

  const auto pi = stationary_distribution(table.rows);
  auto walk_rng = rng.child("walk");
  std::vector<std::uint32_t> ctx(n), next(n);
  std::size_t x = walk_rng.categorical(pi);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t y = walk_rng.categorical(table.rows.row(x));
    ctx[t] = static_cast<std::uint32_t>(x);
    next[t] = static_cast<std::uint32_t>(y);
    x = y;
  }

  LabeledDataset data;
  data.kind = InputKind::Token;
  data.num_classes = vocab;
  data.order = rng.child("order").permutation(n);
  data.inputs = Matrix(n, 1);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.inputs(i, 0) = static_cast<double>(ctx[data.order[i]]);
    data.labels[i] = next[data.order[i]];
  }
  data.meta = {{"generator", "bigram"}, {"vocab", vocab},  {"free_rows", free_rows},
               {"n", n},                {"alpha", alpha}, {"seed", rng.seed()},
               {"path", rng.path()}};
  return {std::move(data), std::move(table)};
}

namespace {

std::vector<double> random_direction(std::size_t d, RngStream& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

GeneratedData gen_hier_classification(std::span<const std::size_t> classes_per_category, std::size_t input_dim,
                                      HierGeometry geometry, std::size_t n, RngStream rng) {
  PREQINFO_CHECK(!classes_per_category.empty() && input_dim >= 1 && n >= 1, InvalidArgument,
                 "hierarchical generator needs categories, input_dim and n >= 1");
  for (auto c : classes_per_category) PREQINFO_CHECK(c >= 1, InvalidArgument, "each category needs >= 1 class");
  PREQINFO_CHECK(geometry.between > geometry.within && geometry.within > 0.0, InvalidArgument,
                 "hierarchical geometry requires between > within > 0");
  PREQINFO_CHECK(geometry.variance >= 0.0 && std::isfinite(geometry.variance), InvalidArgument,
                 "variance must be finite and non-negative");

  const std::size_t classes = std::accumulate(classes_per_category.begin(), classes_per_category.end(), std::size_t{0});
  GaussianMixture gm;
  gm.means = Matrix(classes, input_dim);
  gm.variance = geometry.variance;
  gm.class_prior.assign(classes, 1.0 / static_cast<double>(classes));
  auto geo_rng = rng.child("geometry");
  std::size_t cls = 0;
  for (std::size_t cat = 0; cat < classes_per_category.size(); ++cat) {
    const auto center = random_direction(input_dim, geo_rng);
    for (std::size_t j = 0; j < classes_per_category[cat]; ++j, ++cls) {
      const auto offset = random_direction(input_dim, geo_rng);
      for (std::size_t d = 0; d < input_dim; ++d) {
        gm.means(cls, d) = geometry.between * center[d] + geometry.within * offset[d];
      }
      gm.category_of.push_back(cat);
    }
  }

  auto data = sample_mixture(gm, n, rng);
  data.meta = {{"generator", "hier"},
               {"classes_per_category", std::vector<std::size_t>(classes_per_category.begin(),
                                                                 classes_per_category.end())},
               {"input_dim", input_dim},
               {"between", geometry.between},
               {"within", geometry.within},
               {"variance", geometry.variance},
               {"n", n},
               {"seed", rng.seed()},
               {"path", rng.path()}};
  return {std::move(data), std::move(gm)};
}

LabeledDataset sample_mixture(const GaussianMixture& gm, std::size_t n, RngStream rng,
                              std::span<const std::size_t> classes) {
  const std::size_t K = gm.means.rows(), d = gm.means.cols();
  PREQINFO_CHECK(n >= 1, InvalidArgument, "sample_mixture needs n >= 1");
  std::vector<std::size_t> pool(classes.begin(), classes.end());
  if (pool.empty()) {
    pool.resize(K);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }
  for (auto c : pool) PREQINFO_CHECK(c < K, InvalidArgument, "sample_mixture: class out of range");
  auto sample_rng = rng.child("samples");
  Matrix raw(n, d);
  std::vector<std::uint32_t> raw_labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = pool[sample_rng.below(pool.size())];
    const auto x = sample_mixture_point(gm, y, sample_rng);
    std::copy(x.begin(), x.end(), raw.row(i).begin());
    raw_labels[i] = static_cast<std::uint32_t>(y);
  }
  LabeledDataset data;
  data.kind = InputKind::Dense;
  data.num_classes = K;
  data.inputs = Matrix(n, d);
  data.labels.resize(n);
  data.order = rng.child("order").permutation(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = raw.row(data.order[i]);
    std::copy(src.begin(), src.end(), data.inputs.row(i).begin());
    data.labels[i] = raw_labels[data.order[i]];
  }
  data.meta = {{"generator", "mixture-sample"}, {"n", n}, {"classes", pool}, {"seed", rng.seed()}, {"path", rng.path()}};
  return data;
}

GeneratedData gen_hier_classification(std::size_t categories, std::size_t classes_per_category,
                                      std::size_t input_dim, HierGeometry geometry, std::size_t n, RngStream rng) {
  PREQINFO_CHECK(categories >= 1, InvalidArgument, "need at least one category");
  std::vector<std::size_t> per(categories, classes_per_category);
  return gen_hier_classification(per, input_dim, geometry, n, std::move(rng));
}

// ---- label transforms -----------------------------------------------------

LabeledDataset apply_label_permutation(const LabeledDataset& data, std::span<const std::size_t> perm) {
  PREQINFO_CHECK(perm.size() == data.num_classes, DimensionError, "permutation size must equal K");
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    PREQINFO_CHECK(p < perm.size() && !seen[p], InvalidArgument, "label permutation is not a bijection");
    seen[p] = true;
  }
  LabeledDataset out = data;
  for (auto& y : out.labels) y = static_cast<std::uint32_t>(perm[y]);
  out.meta["label_permutation"] = std::vector<std::size_t>(perm.begin(), perm.end());
  return out;
}

LabeledDataset permute_labels(const LabeledDataset& data, RngStream rng) {
  PREQINFO_CHECK(data.num_classes >= 2, InvalidArgument, "permute_labels needs K >= 2");
  return apply_label_permutation(data, rng.permutation(data.num_classes));
}

LabeledDataset randomize_labels(const LabeledDataset& data, RngStream rng) {
  LabeledDataset out = data;
  if (data.num_classes < 2) return out;
  for (auto& y : out.labels) y = static_cast<std::uint32_t>(rng.below(data.num_classes));
  out.meta["randomized_labels"] = {{"seed", rng.seed()}, {"path", rng.path()}};
  return out;
}

// ---- tasks ----------------------------------------------------------------

std::size_t TaskSpec::num_classes() const {
  return remap.empty() ? 0 : *std::max_element(remap.begin(), remap.end()) + 1;
}

void TaskSpec::validate() const {
  PREQINFO_CHECK(!filter.empty(), InvalidArgument, "task " + name + ": empty class filter");
  PREQINFO_CHECK(filter.size() == remap.size(), DimensionError, "task " + name + ": filter and remap sizes differ");
  std::set<std::size_t> distinct(filter.begin(), filter.end());
  PREQINFO_CHECK(distinct.size() == filter.size(), InvalidArgument, "task " + name + ": duplicate filter labels");
  std::vector<bool> hit(num_classes(), false);
  for (auto r : remap) hit[r] = true;
  PREQINFO_CHECK(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }), InvalidArgument,
                 "task " + name + ": remap is not onto 0..K'-1");
}

TaskSpec make_filter_task(std::string name, std::vector<std::size_t> labels) {
  TaskSpec t;
  t.name = std::move(name);
  t.filter = std::move(labels);
  t.remap.resize(t.filter.size());
  std::iota(t.remap.begin(), t.remap.end(), std::size_t{0});
  return t;
}

TaskSpec make_category_task(std::string name, const GaussianMixture& gm) {
  TaskSpec t;
  t.name = std::move(name);
  t.filter.resize(gm.category_of.size());
  std::iota(t.filter.begin(), t.filter.end(), std::size_t{0});
  t.remap = gm.category_of;
  return t;
}

LabeledDataset subtask(const LabeledDataset& data, const TaskSpec& spec) {
  spec.validate();
  std::vector<long> lookup(data.num_classes, -1);
  for (std::size_t i = 0; i < spec.filter.size(); ++i) {
    PREQINFO_CHECK(spec.filter[i] < data.num_classes, InvalidArgument, "task filter label exceeds source K");
    lookup[spec.filter[i]] = static_cast<long>(spec.remap[i]);
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (lookup[data.labels[i]] >= 0) keep.push_back(i);
  }
  PREQINFO_CHECK(!keep.empty(), InvalidArgument, "task " + spec.name + " selects no examples");
  auto out = data.select(keep);
  for (auto& y : out.labels) y = static_cast<std::uint32_t>(lookup[y]);
  out.num_classes = spec.num_classes();
  out.meta["task"] = {{"name", spec.name}, {"filter", spec.filter}, {"remap", spec.remap}};
  return out;
}

TaskSpec compose(const TaskSpec& first, const TaskSpec& second) {
  TaskSpec out;
  out.name = first.name + "/" + second.name;
  for (std::size_t i = 0; i < first.filter.size(); ++i) {
    const auto mid = first.remap[i];
    for (std::size_t j = 0; j < second.filter.size(); ++j) {
      if (second.filter[j] == mid) {
        out.filter.push_back(first.filter[i]);
        out.remap.push_back(second.remap[j]);
      }
    }
  }
  return out;
}

// ---- serialization --------------------------------------------------------

void write_jsonl(const LabeledDataset& data, std::ostream& out) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto x = data.input(i);
    nlohmann::json line;
    if (data.kind == InputKind::Token) {
      line["input"] = std::vector<std::uint32_t>{data.token(i)};
    } else {
      line["input"] = std::vector<double>(x.begin(), x.end());
    }
    line["label"] = data.labels[i];
    out << line.dump() << '\n';
  }
}

LabeledDataset read_jsonl(std::istream& in, std::size_t num_classes, InputKind kind) {
  std::vector<std::vector<double>> rows;
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      rows.push_back(j.at("input").get<std::vector<double>>());
      labels.push_back(j.at("label").get<std::uint32_t>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(ParseError::Kind::BadValue, "jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  LabeledDataset data;
  data.kind = kind;
  data.num_classes = num_classes;
  const std::size_t d = rows.empty() ? 0 : rows[0].size();
  data.inputs = Matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw ParseError(ParseError::Kind::BadValue, "jsonl rows have differing input sizes");
    std::copy(rows[i].begin(), rows[i].end(), data.inputs.row(i).begin());
  }
  data.labels = std::move(labels);
  data.order.resize(data.size());
  std::iota(data.order.begin(), data.order.end(), std::size_t{0});
  data.meta = {{"generator", "jsonl"}};
  data.validate();
  return data;
}

nlohmann::json true_model_to_json(const TrueModel& tm) {
  if (const auto* b = std::get_if<BigramTable>(&tm)) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < b->vocab; ++i) rows.emplace_back(b->rows.row(i).begin(), b->rows.row(i).end());
    return {{"kind", "bigram-table"}, {"vocab", b->vocab}, {"free_rows", b->free_rows}, {"rows", rows}};
  }
  const auto& gm = std::get<GaussianMixture>(tm);
  std::vector<std::vector<double>> means;
  for (std::size_t i = 0; i < gm.means.rows(); ++i) means.emplace_back(gm.means.row(i).begin(), gm.means.row(i).end());
  return {{"kind", "gaussian-mixture"},
          {"variance", gm.variance},
          {"category_of", gm.category_of},
          {"class_prior", gm.class_prior},
          {"means", means}};
}

}  // namespace preqinfo
