#include "preqinfo/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <optional>
#include <sstream>

#include "preqinfo/analysis.hpp"
#include "preqinfo/continual.hpp"
#include "preqinfo/error.hpp"
#include "preqinfo/infomeasure.hpp"
#include "preqinfo/jobs.hpp"
#include "preqinfo/stats.hpp"

namespace preqinfo {

namespace {

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string fmt2(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double med(std::vector<double> v) { return median(v); }

// ---- shared suites ------------------------------------------------------

constexpr std::size_t kBigramVocab = 20;
constexpr std::size_t kBigramEmbed = 4;
constexpr double kBigramLr = 3e-3;
constexpr std::size_t kBigramN = 4000;
constexpr std::size_t kBigramK = 2000;
const std::size_t kBigramFreeRows[] = {2, 5, 10, 20};

struct BigramRun {
  std::size_t free_rows = 0;
  std::uint64_t seed = 0;
  double oracle_info = 0.0;
  TransferRun run;
  BoundReport bounds;
};

PreqConfig bigram_preq(std::uint64_t seed) {
  PreqConfig cfg;
  cfg.seed = seed;
  cfg.train.optimizer.learning_rate = kBigramLr;
  return cfg;
}

std::vector<BigramRun> bigram_runs(const std::vector<std::uint64_t>& seeds) {
  std::vector<BigramRun> runs;
  for (std::size_t m : kBigramFreeRows)
    for (auto s : seeds) runs.push_back({m, s, 0.0, {}, {}});
  parallel_for(runs.size(), [&](std::size_t i) {
    auto& r = runs[i];
    RngStream rng(r.seed, {"bigram"});
    auto g = gen_bigram_corpus(kBigramVocab, r.free_rows, kBigramN + kBigramK, 0.1, rng.child("data"));
    auto theta0 = init_model(ModelSpec::bigram_lm(kBigramVocab, kBigramEmbed), rng.child("init"));
    r.oracle_info = oracle_model_info(g.truth);
    r.run = information_transfer_run(theta0, g.data, kBigramN, kBigramK, bigram_preq(r.seed));
    r.bounds = bound_report(r.run, g.data, g.truth);
  });
  return runs;
}

struct ContinualSeed {
  std::uint64_t seed = 0;
  std::map<std::string, ContinualResult> results;  // "<method>/<strategy>"
  HeadRetrain head;
};

constexpr std::size_t kContTasks = 4;
constexpr std::size_t kContClassesPerTask = 3;
constexpr std::size_t kContBlobsPerClass = 2;
constexpr std::size_t kContDim = 16;
constexpr std::size_t kContHidden = 64;
constexpr std::size_t kContTrain = 2000;
constexpr std::size_t kContK = 2000;

ContinualSeed continual_seed(std::uint64_t seed) {
  BlobSuiteSpec suite_spec;
  suite_spec.tasks = kContTasks;
  suite_spec.classes_per_task = kContClassesPerTask;
  suite_spec.blobs_per_class = kContBlobsPerClass;
  suite_spec.input_dim = kContDim;
  suite_spec.examples_per_task = kContTrain + kContK;
  const auto suite = blob_task_suite(suite_spec, RngStream(seed, {"cont"}));
  const auto& tasks = suite.tasks;
  const auto& future = suite.future;

  ContinualConfig cfg;
  cfg.spec = ModelSpec::mlp(kContDim, kContHidden, kContClassesPerTask);
  cfg.train_size = kContTrain;
  cfg.k = kContK;
  cfg.future_train_size = kContTrain;
  cfg.seed = seed;
  const auto refs = single_task_references(tasks, cfg);

  const std::vector<std::pair<MethodSpec, HeadStrategy>> plan{
      {MethodSpec::multitask(), HeadStrategy::Separate},
      {MethodSpec::plain(), HeadStrategy::Separate},
      {MethodSpec::l2(0.1), HeadStrategy::Separate},
      {MethodSpec::ewc(10.0), HeadStrategy::Separate},
      {MethodSpec::imm(ImmMerge::Mean, ImmTransfer::Weight), HeadStrategy::Separate},
      {MethodSpec::imm(ImmMerge::Mode, ImmTransfer::L2, 0.1), HeadStrategy::Separate},
      {MethodSpec::ewc(10.0), HeadStrategy::Union},
      {MethodSpec::ewc(10.0), HeadStrategy::Reuse},
  };
  std::vector<SequenceRun> runs(plan.size());
  parallel_for(plan.size(), [&](std::size_t i) {
    runs[i] = run_sequence_full(tasks, future, plan[i].first, plan[i].second, cfg, refs);
  });
  ContinualSeed out;
  out.seed = seed;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& r = runs[i].result;
    out.results[r.method + "/" + to_string(r.strategy)] = r;
    if (plan[i].first.kind == MethodKind::Plain)
      out.head = retrain_head(runs[i].final_model, 0, tasks[0], kContTrain, cfg.train);
  }
  return out;
}

DissectionReport hierarchical_dissection(const std::vector<std::uint64_t>& seeds) {
  RngStream root(1, {"hier"});
  constexpr std::size_t blobs = 4;
  const std::vector<std::size_t> classes{2 * blobs, 3 * blobs};
  auto gen = gen_hier_classification(classes, 16, HierGeometry{}, 10, root.child("gm"));
  auto registry = hierarchical_suite(std::get<GaussianMixture>(gen.truth), 6000, root.child("tasks"), blobs);
  DissectionConfig cfg;
  cfg.spec = ModelSpec::mlp(16, 64, 2);
  cfg.seeds = seeds;
  ChainCache cache;
  const auto chains = dissection_chains();
  return run_dissection(registry, chains, cfg, cache);
}

DissectionReport permuted_dissection(const std::vector<std::uint64_t>& seeds) {
  RngStream root(1, {"hier"});
  const std::vector<std::size_t> classes{2, 3};
  auto gen = gen_hier_classification(classes, 64, HierGeometry{}, 10, root.child("gm"));
  auto registry = hierarchical_suite(std::get<GaussianMixture>(gen.truth), 6000, root.child("tasks"), 1);
  const auto& base = registry.get("T_full", 1);
  registry.add("T_perm", std::vector<LabeledDataset>{base, permute_labels(base, root.child("perm"))});
  DissectionConfig cfg;
  cfg.spec = ModelSpec::mlp(64, 64, 2);
  cfg.seeds = seeds;
  ChainCache cache;
  const std::vector<ChainSpec> chains{ChainSpec::parse("T_full"), ChainSpec::parse("T_full->T_perm")};
  return run_dissection(registry, chains, cfg, cache);
}

// ---- micro-suite helpers --------------------------------------------------

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// worst relative error between analytic and central-difference gradients
double gradient_check(const ModelSpec& spec, RngStream rng, std::size_t points) {
  double worst = 0.0;
  Workspace ws;
  const double h = 1e-5;
  for (std::size_t p = 0; p < points; ++p) {
    auto pr = rng.child(p);
    auto model = init_model(spec, pr.child("init"));
    for (auto& v : model.params.values()) v += 0.3 * pr.normal();
    std::vector<double> x;
    if (spec.kind == ModelKind::BigramLm) {
      x.push_back(static_cast<double>(pr.below(spec.input_dim)));
    } else {
      for (std::size_t i = 0; i < spec.input_dim; ++i) x.push_back(pr.normal());
    }
    const std::size_t label = static_cast<std::size_t>(pr.below(spec.outputs));
    std::vector<double> grad(model.params.size(), 0.0);
    bool clamped = false;
    example_loss_grad(model, x, label, grad, ws, false, &clamped);
    for (std::size_t j = 0; j < grad.size(); ++j) {
      auto vals = model.params.values();
      const double keep = vals[j];
      vals[j] = keep + h;
      const double up = example_loss_grad(model, x, label, {}, ws, false, &clamped);
      vals[j] = keep - h;
      const double down = example_loss_grad(model, x, label, {}, ws, false, &clamped);
      vals[j] = keep;
      worst = std::max(worst, rel_err(grad[j], (up - down) / (2 * h)));
    }
  }
  return worst;
}

double penalty_gradient_check(RngStream rng) {
  const std::size_t n = 50;
  PenaltyTerm p;
  std::vector<double> theta(n);
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = rng.normal();
    p.anchor.push_back(rng.normal());
    p.weights.push_back(rng.uniform(0.1, 2.0));
  }
  p.coefficient = 0.7;
  std::vector<double> grad(n, 0.0);
  penalty_gradient(theta, p, grad);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t j = 0; j < n; ++j) {
    auto t = theta;
    t[j] += h;
    const double up = penalty_value(t, p);
    t[j] -= 2 * h;
    const double down = penalty_value(t, p);
    worst = std::max(worst, rel_err(grad[j], (up - down) / (2 * h)));
  }
  return worst;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::memcmp(&x, &y, sizeof x) == 0;
         });
}

// ---- runner -------------------------------------------------------------

class Runner {
 public:
  explicit Runner(const AcceptanceOptions& o) : opt_(o) {}

  std::vector<CriterionResult> run() {
    std::vector<CriterionResult> out;
    for (int id = 1; id <= kCriterionCount; ++id) {
      if (!opt_.only.empty() && std::find(opt_.only.begin(), opt_.only.end(), id) == opt_.only.end()) continue;
      const auto t0 = std::chrono::steady_clock::now();
      CriterionResult r;
      try {
        r = criterion(id);
      } catch (const std::exception& e) {
        r.name = "criterion " + std::to_string(id);
        r.passed = false;
        r.measured = std::string("error: ") + e.what();
      }
      r.id = id;
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (opt_.on_result) opt_.on_result(r);
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  const std::vector<BigramRun>& bigram() {
    if (!bigram_) bigram_ = bigram_runs(opt_.seeds);
    return *bigram_;
  }
  const std::vector<ContinualSeed>& continual() {
    if (!continual_) {
      std::vector<ContinualSeed> v;
      for (auto s : opt_.seeds) v.push_back(continual_seed(s));
      continual_ = std::move(v);
    }
    return *continual_;
  }
  const DissectionReport& dissection() {
    if (!dissection_) dissection_ = hierarchical_dissection(opt_.seeds);
    return *dissection_;
  }

  CriterionResult criterion(int id) {
    switch (id) {
      case 1: return uniform_identity();
      case 2: return partition_oracle();
      case 3: return telescoping();
      case 4: return random_label_null();
      case 5: return correlation();
      case 6: return bound_sandwich();
      case 7: return pretraining_helps();
      case 8: return permuted_labels();
      case 9: return identities();
      case 10: return curve_vs_validation();
      case 11: return continual_ordering();
      case 12: return head_strategies();
      case 13: return head_recovery();
      case 14: return micro_suite();
    }
    throw InvalidArgument("unknown criterion " + std::to_string(id));
  }

  CriterionResult uniform_identity() {
    const std::size_t n = 1000, K = 10;
    RngStream rng(1, {"acceptance", "uniform"});
    auto gen = gen_hier_classification(1, K, 8, HierGeometry{}, n, rng.child("data"));
    auto model = init_model(ModelSpec::softmax_regression(8, K), rng.child("init"));
    std::fill(model.params.values().begin(), model.params.values().end(), 0.0);
    PreqConfig cfg;
    cfg.seed = 1;
    cfg.train.optimizer.learning_rate = 0.0;
    const auto curve = preq_code(model, gen.data, cfg);
    const double expected = static_cast<double>(n) * std::log(static_cast<double>(K));
    const double err = std::abs(curve.total() - expected);
    CriterionResult r;
    r.name = "uniform-coder identity";
    r.passed = err <= 1e-9;
    r.measured = "|total - n ln K| = " + fmt("%.3g nats", err) + " (total " + fmt("%.6f nats", curve.total()) + ")";
    r.threshold = "<= 1e-9 nats";
    r.detail = {{"total_nats", curve.total()}, {"expected_nats", expected}, {"abs_error_nats", err}};
    return r;
  }

  CriterionResult partition_oracle() {
    std::vector<double> gaps;
    nlohmann::json per = nlohmann::json::array();
    for (auto s : opt_.seeds) {
      RngStream rng(s, {"acceptance", "partition"});
      auto g = gen_bigram_corpus(kBigramVocab, 10, 32, 0.1, rng.child("data"));
      auto theta0 = init_model(ModelSpec::bigram_lm(kBigramVocab, kBigramEmbed), rng.child("init"));
      const auto cfg = bigram_preq(s);
      const double approx = preq_code(theta0, g.data, cfg).total();
      const double exact = preq_exact(theta0, g.data, cfg).total();
      gaps.push_back(std::abs(approx - exact) / exact);
      per.push_back({{"seed", s}, {"preq_code_nats", approx}, {"preq_exact_nats", exact}});
    }
    CriterionResult r;
    r.name = "partition approximation";
    r.passed = med(gaps) <= 0.10;
    r.measured = "median |code - exact| / exact = " + fmt("%.4f", med(gaps));
    r.threshold = "<= 0.10";
    r.detail = {{"runs", per}, {"relative_gap_median", med(gaps)}};
    return r;
  }

  CriterionResult telescoping() {
    const auto& curve = bigram().front().run.ref_curve;
    double total = 0.0;
    for (const auto& rec : curve.records) total += rec.codelength;
    double worst = std::abs(total - curve.total());
    for (std::size_t t : curve.schedule.boundaries)
      worst = std::max(worst, std::abs(curve_prefix(curve, t) + curve_suffix(curve, t) - total));
    CriterionResult r;
    r.name = "telescoping identity";
    r.passed = worst <= 1e-9;
    r.measured = "max |prefix + suffix - total| = " + fmt("%.3g nats", worst) + " over " +
                 std::to_string(curve.schedule.boundaries.size()) + " boundaries";
    r.threshold = "<= 1e-9 nats";
    r.detail = {{"max_abs_error_nats", worst}, {"boundaries", curve.schedule.boundaries}};
    return r;
  }

  CriterionResult random_label_null() {
    const std::size_t n = 2000, k = 1000, K = 10;
    std::vector<double> lits;
    for (auto s : opt_.seeds) {
      RngStream rng(s, {"acceptance", "random-labels"});
      auto gen = gen_hier_classification(1, K, 16, HierGeometry{}, 10, rng.child("gm"));
      auto data = sample_mixture(std::get<GaussianMixture>(gen.truth), n + k, rng.child("data"));
      data = randomize_labels(data, rng.child("labels"));
      auto theta0 = init_model(ModelSpec::mlp(16, 64, K), rng.child("init"));
      PreqConfig cfg;
      cfg.seed = s;
      lits.push_back(information_transfer(theta0, data, n, k, cfg).value);
    }
    const double bound = 0.05 * k * std::log(static_cast<double>(K));
    CriterionResult r;
    r.name = "random-label null";
    r.passed = std::abs(med(lits)) <= bound;
    r.measured = "median L_IT = " + fmt("%.1f nats", med(lits));
    r.threshold = "|L_IT| <= " + fmt("%.1f nats", bound);
    r.detail = {{"lit_nats", lits}, {"bound_nats", bound}};
    return r;
  }

  CriterionResult correlation() {
    std::vector<double> xs, ys;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t m : kBigramFreeRows) {
      std::vector<double> lits, oracle;
      for (const auto& b : bigram())
        if (b.free_rows == m) {
          lits.push_back(b.run.report.value);
          oracle.push_back(b.oracle_info);
        }
      xs.push_back(mean(oracle));
      ys.push_back(median(lits));
      per.push_back({{"free_rows", m}, {"lit_nats", lits}, {"oracle_model_info_nats", oracle}});
    }
    const double rho = pearson(xs, ys);
    CriterionResult r;
    r.name = "correlation with ground truth";
    r.passed = rho >= 0.9;
    r.measured = "Pearson r = " + fmt("%.3f", rho);
    r.threshold = ">= 0.9";
    r.detail = {{"pearson", rho}, {"points", per}};
    return r;
  }

  CriterionResult bound_sandwich() {
    std::size_t lower_ok = 0, upper_ok = 0, total = 0;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& b : bigram()) {
      const double k = static_cast<double>(b.run.report.k);
      const double sigma = k * b.bounds.lit_one.std_error;
      const double lower = k * b.bounds.lit_one.value - 3 * sigma;
      const double upper = b.bounds.lit_infty_oracle + 3 * sigma;
      const double lit = b.run.report.value;
      lower_ok += lower <= lit;
      upper_ok += lit <= upper;
      ++total;
      per.push_back({{"free_rows", b.free_rows},
                     {"seed", b.seed},
                     {"lit_nats", lit},
                     {"k_lit_one_nats", k * b.bounds.lit_one.value},
                     {"sigma_nats", sigma},
                     {"lit_infty_oracle_nats", b.bounds.lit_infty_oracle}});
    }
    CriterionResult r;
    r.name = "bound sandwich";
    r.passed = lower_ok == total && upper_ok == total;
    r.measured = "lower bound holds on " + std::to_string(lower_ok) + "/" + std::to_string(total) +
                 " runs, upper on " + std::to_string(upper_ok) + "/" + std::to_string(total);
    r.threshold = "both on every run (3 sigma, nats)";
    r.detail = {{"runs", per}};
    return r;
  }

  CriterionResult pretraining_helps() {
    const auto& rep = dissection();
    const double scratch = rep.value("T_A"), pre = rep.value("T_V->T_A");
    CriterionResult r;
    r.name = "pretraining reduces new information";
    r.passed = pre < scratch;
    r.measured = "L_IT(T_A | T_V) = " + fmt("%.1f nats", pre) + ", L_IT(T_A | scratch) = " + fmt("%.1f nats", scratch);
    r.threshold = "pretrained < scratch";
    r.detail = {{"pretrained_nats", pre}, {"scratch_nats", scratch}};
    return r;
  }

  CriterionResult permuted_labels() {
    const auto rep = permuted_dissection(opt_.seeds);
    const double scratch = rep.value("T_full"), pre = rep.value("T_full->T_perm");
    CriterionResult r;
    r.name = "permuted-label analog";
    r.passed = pre <= 0.5 * scratch;
    r.measured = "L_IT(permuted | pretrained) = " + fmt("%.1f nats", pre) + ", L_IT(original | scratch) = " +
                 fmt("%.1f nats", scratch) + fmt(" (ratio %.3f)", pre / scratch);
    r.threshold = "ratio <= 0.5";
    r.detail = rep.to_json();
    return r;
  }

  CriterionResult identities() {
    const auto& rep = dissection();
    double worst = 0.0;
    bool ok = true;
    std::string list;
    for (const auto& id : rep.identities) {
      ok = ok && id.within_tolerance;
      const double res = id.residual.value_or(INFINITY);
      worst = std::max(worst, res);
      list += (list.empty() ? "" : " ") + fmt("%.2f", res);
    }
    CriterionResult r;
    r.name = "dissection identities";
    r.passed = ok && rep.identities.size() == 7;
    r.measured = "residuals " + list + fmt(" (max %.3f)", worst);
    r.threshold = "all <= 0.2";
    r.detail = rep.to_json();
    return r;
  }

  CriterionResult curve_vs_validation() {
    double worst = 0.0;
    std::size_t segments = 0, within = 0;
    for (const auto& b : bigram())
      for (const auto& rec : b.run.ref_curve.records) {
        const std::size_t len = rec.t_end - rec.t_start;
        if (len < 64 || !std::isfinite(rec.heldout_nll)) continue;
        const double dev = std::abs(rec.codelength / static_cast<double>(len) - rec.heldout_nll) / rec.heldout_nll;
        worst = std::max(worst, dev);
        ++segments;
        within += dev <= 0.25;
      }
    CriterionResult r;
    r.name = "coding curve tracks validation loss";
    r.passed = segments > 0 && within == segments;
    r.measured = std::to_string(within) + "/" + std::to_string(segments) + " segments within, max deviation " +
                 fmt("%.3f", worst);
    r.threshold = "every segment >= 64 examples within 25%";
    r.detail = {{"segments", segments}, {"within", within}, {"max_relative_deviation", worst}};
    return r;
  }

  CriterionResult continual_ordering() {
    std::map<std::string, std::vector<double>> all_past;
    std::vector<double> first_ratio, last_ratio;
    for (const auto& cs : continual()) {
      for (const auto& [key, res] : cs.results)
        if (res.strategy == HeadStrategy::Separate || res.method == "multi-task")
          all_past[res.method].push_back(res.all_past_lia_sum);
      const auto& plain = cs.results.at("plain/separate");
      const auto rk = ratio_kept(plain, plain.reference_lit);
      first_ratio.push_back(rk.ratio.front());
      last_ratio.push_back(rk.ratio.back());
    }
    const double multi = med(all_past.at("multi-task"));
    bool dominates = true;
    nlohmann::json medians;
    std::string best_seq;
    double best = -INFINITY;
    for (const auto& [m, v] : all_past) {
      medians[m] = med(v);
      if (m == "multi-task") continue;
      dominates = dominates && multi >= med(v);
      if (med(v) > best) {
        best = med(v);
        best_seq = m;
      }
    }
    const double plain = med(all_past.at("plain"));
    const bool half = plain >= 0.5 * multi;
    const bool recency = med(last_ratio) > med(first_ratio);
    CriterionResult r;
    r.name = "continual-learning ordering";
    r.passed = dominates && half && recency;
    r.measured = "multi-task " + fmt("%.3f k-nats", multi / 1000) + " vs best sequential (" + best_seq + ") " +
                 fmt("%.3f k-nats", best / 1000) + "; plain/multi " + fmt("%.2f", plain / multi) +
                 "; plain ratio kept first/last " + fmt2("%.2f/%.2f", med(first_ratio), med(last_ratio));
    r.threshold = "multi >= all, plain >= 0.5 multi, last > first";
    r.detail = {{"all_past_lia_median_nats", medians},
                {"plain_ratio_first", first_ratio},
                {"plain_ratio_last", last_ratio}};
    return r;
  }

  CriterionResult head_strategies() {
    std::vector<double> sep, uni, reuse;
    for (const auto& cs : continual()) {
      sep.push_back(cs.results.at("ewc/separate").all_past_lia_sum);
      uni.push_back(cs.results.at("ewc/union").all_past_lia_sum);
      reuse.push_back(cs.results.at("ewc/reuse").all_past_lia_sum);
    }
    const double s = med(sep), u = med(uni), q = med(reuse);
    const double rel = std::abs(s - u) / std::abs(s);
    CriterionResult r;
    r.name = "head-strategy ordering (EWC)";
    r.passed = rel <= 0.2 && q < s && q < u;
    r.measured = "separate " + fmt("%.3f k-nats", s / 1000) + ", union " + fmt("%.3f k-nats", u / 1000) + ", reuse " +
                 fmt("%.3f k-nats", q / 1000) + fmt(" (|sep - union| / sep %.3f)", rel);
    r.threshold = "relative gap <= 0.2, reuse < both";
    r.detail = {{"separate_nats", sep}, {"union_nats", uni}, {"reuse_nats", reuse}};
    return r;
  }

  CriterionResult head_recovery() {
    std::vector<double> gains, before, after;
    for (const auto& cs : continual()) {
      before.push_back(cs.head.before);
      after.push_back(cs.head.after);
      gains.push_back(100.0 * (cs.head.after - cs.head.before));
    }
    CriterionResult r;
    r.name = "head-only recovery";
    r.passed = med(gains) > 10.0;
    r.measured = "median accuracy gain " + fmt("%.1f points", med(gains));
    r.threshold = "> 10 points";
    r.detail = {{"before", before}, {"after", after}, {"gain_points", gains}};
    return r;
  }

  CriterionResult micro_suite() {
    nlohmann::json d;
    std::vector<std::string> failed;
    RngStream rng(1, {"acceptance", "micro"});
    auto gen = gen_hier_classification(1, 3, 8, HierGeometry{}, 10, rng.child("gm"));
    const auto& gm = std::get<GaussianMixture>(gen.truth);
    auto data = sample_mixture(gm, 600, rng.child("data"));
    auto other = sample_mixture(gm, 600, rng.child("other"));
    const auto spec = ModelSpec::mlp(8, 16, 3);
    TrainConfig tc;
    tc.shuffle_seed = 7;
    auto trained = train(init_model(spec, rng.child("init")), data, tc);

    PreqConfig pc;
    pc.seed = 3;
    const double lia = information_advantage(trained, trained, other, 300, pc).value;
    d["lia_self_nats"] = lia;
    if (lia != 0.0) failed.push_back("L_IA(theta, theta)");

    auto second = train(init_model(spec, rng.child("init2")), other, tc);
    std::vector<ModelState> same{trained, trained, trained};
    const auto merged_mean = imm_merge(same, {}, ImmMerge::Mean);
    const bool mean_exact = same_bits(merged_mean.params.values(), trained.params.values());
    FisherDiag equal;
    equal.values.assign(trained.params.size(), 100.0);
    std::vector<FisherDiag> fishers{equal, equal};
    std::vector<ModelState> pair{trained, second};
    const auto mode = imm_merge(pair, fishers, ImmMerge::Mode);
    const auto mean2 = imm_merge(pair, {}, ImmMerge::Mean);
    double mode_gap = 0.0;
    for (std::size_t i = 0; i < mode.params.size(); ++i)
      mode_gap = std::max(mode_gap, std::abs(mode.params.values()[i] - mean2.params.values()[i]));
    d["imm_identical_mean_exact"] = mean_exact;
    d["imm_mode_equal_fisher_gap"] = mode_gap;
    if (!mean_exact || mode_gap > 1e-9) failed.push_back("IMM identity");

    const auto fisher = estimate_fisher(trained, data, 200, rng.child("fisher"));
    Anchor anchor{std::vector<double>(trained.params.values().begin(), trained.params.values().end()), fisher.values};
    const auto frozen = train_task(trained, other, MethodSpec::ewc(1e9), anchor, tc);
    double drift = 0.0;
    for (std::size_t i = 0; i < trained.head.offset; ++i)
      drift = std::max(drift, std::abs(frozen.params.values()[i] - trained.params.values()[i]));
    d["ewc_freeze_body_drift"] = drift;
    if (drift > 1e-3) failed.push_back("EWC freeze");

    double grad = 0.0;
    grad = std::max(grad, gradient_check(ModelSpec::softmax_regression(5, 4), rng.child("g-softmax"), 20));
    grad = std::max(grad, gradient_check(ModelSpec::mlp(5, 6, 4), rng.child("g-mlp"), 20));
    grad = std::max(grad, gradient_check(ModelSpec::bigram_lm(7, 3), rng.child("g-bigram"), 20));
    grad = std::max(grad, penalty_gradient_check(rng.child("g-penalty")));
    d["gradient_check_max_rel_error"] = grad;
    if (grad > 1e-4) failed.push_back("gradient check");

    auto rerun = [&] {
      auto g2 = gen_hier_classification(1, 3, 8, HierGeometry{}, 10, rng.child("gm"));
      auto x = sample_mixture(std::get<GaussianMixture>(g2.truth), 300, rng.child("rerun"));
      auto m = init_model(spec, rng.child("rerun-init"));
      auto curve = preq_code(m, x, pc);
      const auto last = curve.models.back().params.values();
      return std::make_pair(curve.total(), std::vector<double>(last.begin(), last.end()));
    };
    const auto a = rerun(), b = rerun();
    const bool identical = std::memcmp(&a.first, &b.first, sizeof a.first) == 0 && same_bits(a.second, b.second);
    d["bit_identical_rerun"] = identical;
    if (!identical) failed.push_back("rerun determinism");

    CriterionResult r;
    r.name = "exactness micro-suite";
    r.passed = failed.empty();
    std::string f;
    for (const auto& s : failed) f += (f.empty() ? "" : ", ") + s;
    r.measured = failed.empty() ? "L_IA self " + fmt("%.1g nats", lia) + ", mode-mean gap " + fmt("%.1e", mode_gap) +
                                      ", EWC drift " + fmt("%.1e", drift) + ", grad rel err " + fmt("%.1e", grad)
                                : "failed: " + f;
    r.threshold = "L_IA = 0, merge exact, drift <= 1e-3, grad <= 1e-4, bit-identical";
    r.detail = d;
    return r;
  }

  const AcceptanceOptions& opt_;
  std::optional<std::vector<BigramRun>> bigram_;
  std::optional<std::vector<ContinualSeed>> continual_;
  std::optional<DissectionReport> dissection_;
};

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  for (int id : options.only)
    PREQINFO_CHECK(id >= 1 && id <= kCriterionCount, InvalidArgument, "unknown criterion " + std::to_string(id));
  PREQINFO_CHECK(!options.seeds.empty(), InvalidArgument, "acceptance needs at least one seed");
  return Runner(options).run();
}

std::string format_result_line(const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "%s %2d ", r.passed ? "PASS" : "FAIL", r.id);
  return std::string(head) + r.name + ": " + r.measured + " [" + r.threshold + "]";
}

std::string format_summary_table(const std::vector<CriterionResult>& results) {
  std::ostringstream o;
  std::size_t passed = 0;
  for (const auto& r : results) {
    o << format_result_line(r) << fmt(" (%.1fs)", r.seconds) << "\n";
    passed += r.passed;
  }
  o << passed << "/" << results.size() << " criteria passed\n";
  return o.str();
}

nlohmann::json to_json(const CriterionResult& r) {
  return {{"id", r.id},       {"name", r.name},           {"passed", r.passed}, {"measured", r.measured},
          {"threshold", r.threshold}, {"seconds", r.seconds}, {"detail", r.detail}};
}

}  // namespace preqinfo
