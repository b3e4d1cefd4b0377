#include "preqinfo/continual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "preqinfo/error.hpp"
#include "preqinfo/infomeasure.hpp"
#include "preqinfo/jobs.hpp"

namespace preqinfo {

// ---- MethodSpec -----------------------------------------------------------

MethodSpec MethodSpec::plain() { return {}; }

MethodSpec MethodSpec::l2(double c) {
  MethodSpec m;
  m.kind = MethodKind::L2;
  m.c = c;
  return m;
}

MethodSpec MethodSpec::ewc(double c, std::size_t fisher_samples) {
  MethodSpec m;
  m.kind = MethodKind::Ewc;
  m.c = c;
  m.fisher_samples = fisher_samples;
  return m;
}

MethodSpec MethodSpec::imm(ImmMerge merge, ImmTransfer transfer, double c, std::vector<double> alphas) {
  MethodSpec m;
  m.kind = MethodKind::Imm;
  m.merge = merge;
  m.transfer = transfer;
  m.c = c;
  m.alphas = std::move(alphas);
  return m;
}

MethodSpec MethodSpec::multitask() {
  MethodSpec m;
  m.kind = MethodKind::MultiTask;
  return m;
}

std::string MethodSpec::name() const {
  switch (kind) {
    case MethodKind::Plain: return "plain";
    case MethodKind::L2: return "l2";
    case MethodKind::Ewc: return "ewc";
    case MethodKind::MultiTask: return "multi-task";
    case MethodKind::Imm:
      return std::string("imm-") + (merge == ImmMerge::Mean ? "mean" : "mode") +
             (transfer == ImmTransfer::Weight ? "-weight" : "-l2");
  }
  return "?";
}

void MethodSpec::validate(std::size_t task_count) const {
  PREQINFO_CHECK(c >= 0.0 && std::isfinite(c), InvalidArgument, "method coefficient c must be finite and >= 0");
  if (needs_fisher()) PREQINFO_CHECK(fisher_samples >= 1, InvalidArgument, "fisher_samples must be >= 1");
  if (kind == MethodKind::Imm && !alphas.empty()) {
    PREQINFO_CHECK(alphas.size() == task_count, InvalidArgument, "imm alphas must have one weight per task");
    double s = 0.0;
    for (double a : alphas) {
      PREQINFO_CHECK(a >= 0.0, InvalidArgument, "imm alphas must be non-negative");
      s += a;
    }
    PREQINFO_CHECK(std::abs(s - 1.0) <= 1e-9, InvalidArgument, "imm alphas must sum to 1");
  }
}

bool MethodSpec::needs_fisher() const {
  return kind == MethodKind::Ewc || (kind == MethodKind::Imm && merge == ImmMerge::Mode);
}

// ---- Fisher ---------------------------------------------------------------

FisherDiag estimate_fisher(const ModelState& model, const LabeledDataset& data, std::size_t samples, RngStream rng) {
  PREQINFO_CHECK(!data.empty(), InvalidArgument, "estimate_fisher: empty data");
  PREQINFO_CHECK(samples >= 1, InvalidArgument, "estimate_fisher: samples must be >= 1");
  check_compatible(model, data);
  const std::size_t P = model.params.size();
  FisherDiag f;
  f.values.assign(P, 0.0);
  f.samples = samples;
  std::vector<double> grad(P);
  Workspace ws;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto i = static_cast<std::size_t>(rng.below(data.size()));
    forward_logits(model, data.input(i), ws);
    const auto probs = softmax(ws.logits);
    const std::size_t y = rng.categorical(probs);
    std::fill(grad.begin(), grad.end(), 0.0);
    example_loss_grad(model, data.input(i), y, grad, ws, false, nullptr);
    for (std::size_t j = 0; j < P; ++j) f.values[j] += grad[j] * grad[j];
  }
  for (auto& v : f.values) v /= static_cast<double>(samples);
  return f;
}

// ---- anchors --------------------------------------------------------------

Anchor align_anchor(const Anchor& anchor, const ModelState& before, const ModelState& after) {
  PREQINFO_CHECK(anchor.params.size() == before.params.size() && anchor.weights.size() == before.params.size(),
                 DimensionError, "anchor does not match the model it was built for");
  PREQINFO_CHECK(before.head.offset == after.head.offset, IncompatibleError, "anchor alignment needs the same body");
  Anchor out;
  const auto after_values = after.params.values();
  out.params.assign(after_values.begin(), after_values.end());
  out.weights.assign(after_values.size(), 0.0);
  const std::size_t body = before.head.offset;
  std::copy(anchor.params.begin(), anchor.params.begin() + static_cast<std::ptrdiff_t>(body), out.params.begin());
  std::copy(anchor.weights.begin(), anchor.weights.begin() + static_cast<std::ptrdiff_t>(body), out.weights.begin());

  const std::size_t fan = before.spec.head_inputs();
  const std::size_t kb = before.spec.outputs, ka = after.spec.outputs;
  const bool union_growth = !after.task_rows.empty() && ka >= kb;
  const auto hb = before.head_values(), ha = after.head_values();
  const bool same_head = kb == ka && std::equal(hb.begin(), hb.end(), ha.begin());
  if (!union_growth && !same_head) return out;  // fresh or swapped head: not anchored

  // rows 0..kb-1 of the new head are the old head's rows
  for (std::size_t r = 0; r < kb; ++r) {
    for (std::size_t c = 0; c < fan; ++c) {
      const std::size_t src = body + r * fan + c, dst = body + r * fan + c;
      out.params[dst] = anchor.params[src];
      out.weights[dst] = anchor.weights[src];
    }
    const std::size_t src = body + kb * fan + r, dst = body + ka * fan + r;
    out.params[dst] = anchor.params[src];
    out.weights[dst] = anchor.weights[src];
  }
  return out;
}

ModelState train_task(const ModelState& model, const LabeledDataset& data, const MethodSpec& method,
                      const std::optional<Anchor>& anchor, const TrainConfig& cfg) {
  const bool penalised = method.kind == MethodKind::L2 || method.kind == MethodKind::Ewc ||
                         (method.kind == MethodKind::Imm && method.transfer == ImmTransfer::L2);
  TrainConfig tc = cfg;
  if (penalised && anchor) {
    PREQINFO_CHECK(anchor->params.size() == model.params.size(), DimensionError,
                   "train_task: anchor does not match the model");
    if (method.kind == MethodKind::Ewc) {
      PREQINFO_CHECK(anchor->weights.size() == model.params.size(), MissingOperand,
                     "train_task: EWC needs accumulated Fisher weights");
    }
    PREQINFO_CHECK(anchor->weights.size() == model.params.size(), DimensionError,
                   "train_task: anchor weights do not match the model");
    tc.penalty = PenaltyTerm{anchor->params, anchor->weights, method.c};
  }
  auto out = train(model, data, tc);
  out.lineage.back() += " method=" + method.name();
  return out;
}

// ---- IMM ------------------------------------------------------------------

namespace {

std::vector<double> uniform_alphas(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

std::vector<double> merge_vectors(const std::vector<std::span<const double>>& vs,
                                  const std::vector<std::span<const double>>& fs, ImmMerge merge,
                                  std::span<const double> alphas) {
  const std::size_t P = vs.front().size();
  std::vector<double> out(P);
  if (merge == ImmMerge::Mean) {
    // theta_1 + sum_i a_i (theta_i - theta_1): equal to sum_i a_i theta_i, exact for identical inputs
    for (std::size_t j = 0; j < P; ++j) {
      double acc = 0.0;
      for (std::size_t i = 1; i < vs.size(); ++i) acc += alphas[i] * (vs[i][j] - vs[0][j]);
      out[j] = vs[0][j] + acc;
    }
    return out;
  }
  for (std::size_t j = 0; j < P; ++j) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      num += alphas[i] * fs[i][j] * vs[i][j];
      den += alphas[i] * fs[i][j];
    }
    out[j] = num / (den + kImmMergeEpsilon);
  }
  return out;
}

std::vector<double> resolve_alphas(std::span<const double> alphas, std::size_t n) {
  if (alphas.empty()) return uniform_alphas(n);
  PREQINFO_CHECK(alphas.size() == n, InvalidArgument, "imm_merge: one alpha per model required");
  double s = 0.0;
  for (double a : alphas) {
    PREQINFO_CHECK(a >= 0.0 && std::isfinite(a), InvalidArgument, "imm_merge: alphas must be finite and >= 0");
    s += a;
  }
  PREQINFO_CHECK(std::abs(s - 1.0) <= 1e-9, InvalidArgument, "imm_merge: alphas must sum to 1");
  return {alphas.begin(), alphas.end()};
}

}  // namespace

ModelState imm_merge(std::span<const ModelState> models, std::span<const FisherDiag> fishers, ImmMerge merge,
                     std::span<const double> alphas) {
  PREQINFO_CHECK(!models.empty(), InvalidArgument, "imm_merge: no models");
  for (const auto& m : models) {
    PREQINFO_CHECK(m.spec == models.front().spec && m.params.same_layout(models.front().params), IncompatibleError,
                   "imm_merge: models must share one spec");
  }
  if (merge == ImmMerge::Mode) {
    PREQINFO_CHECK(fishers.size() == models.size(), MissingOperand, "imm_merge: mode merge needs one Fisher per model");
    for (const auto& f : fishers) {
      PREQINFO_CHECK(f.values.size() == models.front().params.size(), DimensionError,
                     "imm_merge: Fisher does not match the parameters");
    }
  }
  const auto a = resolve_alphas(alphas, models.size());
  std::vector<std::span<const double>> vs, fs;
  for (const auto& m : models) vs.push_back(m.params.values());
  for (const auto& f : fishers) fs.push_back(f.values);
  ModelState out = models.back();
  const auto merged = merge_vectors(vs, fs, merge, a);
  std::copy(merged.begin(), merged.end(), out.params.values().begin());
  // heads parked by every model are merged by plain averaging (no Fisher is kept for them)
  for (auto& [task, parked] : out.parked_heads) {
    std::vector<std::span<const double>> hv;
    bool everywhere = true;
    for (const auto& m : models) {
      auto it = m.parked_heads.find(task);
      if (it == m.parked_heads.end() || it->second.values.size() != parked.values.size()) {
        everywhere = false;
        break;
      }
      hv.push_back(it->second.values);
    }
    if (everywhere) parked.values = merge_vectors(hv, {}, ImmMerge::Mean, a);
  }
  out.lineage.push_back("merge imm-" + std::string(merge == ImmMerge::Mean ? "mean" : "mode") + " of " +
                        std::to_string(models.size()) + " models");
  return out;
}

// ---- protocol -------------------------------------------------------------

void ContinualConfig::validate() const {
  spec.validate();
  PREQINFO_CHECK(spec.kind != ModelKind::BigramLm, InvalidArgument, "continual runs need a dense-input model");
  PREQINFO_CHECK(train_size >= 2, InvalidArgument, "continual train_size must be >= 2");
  train.validate();
  preq.validate();
}

nlohmann::json ContinualResult::to_json() const {
  auto metrics = [](const TaskMetrics& t) {
    return nlohmann::json{{"accuracy", t.accuracy},
                          {"mean_nll_nats", t.mean_nll},
                          {"lia_nats", t.lia},
                          {"lia_knats", t.lia / 1000.0},
                          {"reference_id", t.reference_id}};
  };
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : tasks) ts.push_back(metrics(t));
  return {{"method", method},
          {"head_strategy", to_string(strategy)},
          {"seed", seed},
          {"tasks", ts},
          {"all_past_lia_sum_nats", all_past_lia_sum},
          {"all_past_lia_joint_nats", all_past_lia_joint ? nlohmann::json(*all_past_lia_joint) : nlohmann::json()},
          {"all_past_accuracy", all_past_accuracy},
          {"future", metrics(future)},
          {"reference_lit_nats", reference_lit},
          {"final_model_id", final_model_id}};
}

namespace {

struct Split {
  LabeledDataset train;
  LabeledDataset eval;
};

Split split_task(const LabeledDataset& data, std::size_t train_size) {
  PREQINFO_CHECK(data.size() > train_size, InvalidArgument,
                 "task has " + std::to_string(data.size()) + " examples; needs more than train_size=" +
                     std::to_string(train_size));
  return {data.slice(0, train_size), data.slice(train_size, data.size())};
}

std::size_t stream_length(const ContinualConfig& cfg, const LabeledDataset& eval) {
  return cfg.k == 0 ? eval.size() : std::min(cfg.k, eval.size());
}

PreqConfig preq_for(const ContinualConfig& cfg, const std::string& label) {
  PreqConfig p = cfg.preq;
  p.seed = RngStream(cfg.seed, {"continual", "preq", label}).key();
  return p;
}

void check_tasks(std::span<const LabeledDataset> tasks, const ContinualConfig& cfg) {
  PREQINFO_CHECK(tasks.size() >= 2, InvalidArgument, "continual runs need at least two tasks");
  for (const auto& t : tasks) {
    PREQINFO_CHECK(t.kind == InputKind::Dense && t.input_dim() == cfg.spec.input_dim, IncompatibleError,
                   "continual tasks must share the model's dense input dimension");
    PREQINFO_CHECK(t.num_classes >= 1, InvalidArgument, "task without classes");
  }
}

}  // namespace

std::vector<SingleTaskReference> single_task_references(std::span<const LabeledDataset> tasks,
                                                        const ContinualConfig& cfg) {
  cfg.validate();
  check_tasks(tasks, cfg);
  std::vector<SingleTaskReference> refs(tasks.size());
  parallel_for(
      tasks.size(),
      [&](std::size_t i) {
        const auto split = split_task(tasks[i], cfg.train_size);
        auto& r = refs[i];
        r.init = init_model(cfg.spec.with_outputs(tasks[i].num_classes), RngStream(cfg.seed, {"continual", "ref"}).child(i));
        const std::size_t k = stream_length(cfg, split.eval);
        auto run = information_transfer_run(r.init, tasks[i], cfg.train_size, k, preq_for(cfg, "ref" + std::to_string(i)));
        r.lit = run.report.value;
        r.trained = run.theta_n;
        r.accuracy = accuracy(r.trained, split.eval);
      },
      cfg.preq.jobs);
  return refs;
}

SequenceRun run_sequence_full(std::span<const LabeledDataset> tasks, const LabeledDataset& future,
                              const MethodSpec& method, HeadStrategy strategy, const ContinualConfig& cfg,
                              std::span<const SingleTaskReference> references) {
  cfg.validate();
  check_tasks(tasks, cfg);
  method.validate(tasks.size());
  const std::size_t T = tasks.size();
  std::vector<SingleTaskReference> computed;
  if (references.empty()) {
    computed = single_task_references(tasks, cfg);
    references = computed;
  }
  PREQINFO_CHECK(references.size() == T, InvalidArgument, "one single-task reference per task required");
  if (strategy == HeadStrategy::Reuse) {
    for (const auto& t : tasks) {
      PREQINFO_CHECK(t.num_classes == tasks.front().num_classes, IncompatibleError,
                     "reuse strategy needs the same number of classes in every task");
    }
  }
  const bool multitask = method.kind == MethodKind::MultiTask;
  if (multitask) strategy = HeadStrategy::Union;

  const RngStream root(cfg.seed, {"continual", method.name(), to_string(strategy)});
  const RngStream head_rng = root.child("head");
  std::vector<Split> splits;
  for (const auto& t : tasks) splits.push_back(split_task(t, cfg.train_size));

  ModelState model = init_model(cfg.spec.with_outputs(tasks.front().num_classes), RngStream(cfg.seed, {"continual", "init"}));

  if (multitask) {
    for (std::size_t i = 0; i < T; ++i) {
      model = reset_head(model, HeadStrategy::Union, static_cast<std::uint32_t>(i), head_rng, tasks[i].num_classes);
    }
    std::vector<LabeledDataset> parts;
    for (std::size_t i = 0; i < T; ++i) parts.push_back(to_union_labels(model, static_cast<std::uint32_t>(i), splits[i].train));
    TrainConfig tc = cfg.train;
    tc.shuffle_seed = root.child("train").key();
    model = train(model, concat(parts), tc);
  } else {
    std::optional<Anchor> anchor;
    std::vector<std::vector<double>> bodies, body_fishers;
    const bool penalised = method.kind == MethodKind::L2 || method.kind == MethodKind::Ewc ||
                           (method.kind == MethodKind::Imm && method.transfer == ImmTransfer::L2);
    for (std::size_t i = 0; i < T; ++i) {
      const auto task = static_cast<std::uint32_t>(i);
      ModelState before = model;
      model = reset_head(model, strategy, task, head_rng, tasks[i].num_classes);
      if (anchor) anchor = align_anchor(*anchor, before, model);
      const auto data = strategy == HeadStrategy::Union ? to_union_labels(model, task, splits[i].train) : splits[i].train;
      TrainConfig tc = cfg.train;
      tc.shuffle_seed = root.child("train").child(i).key();
      model = train_task(model, data, method, anchor, tc);

      std::optional<FisherDiag> fisher;
      if (method.needs_fisher()) {
        fisher = estimate_fisher(model, data, method.fisher_samples, root.child("fisher").child(i));
      }
      if (penalised) {
        Anchor next;
        const auto v = model.params.values();
        next.params.assign(v.begin(), v.end());
        if (method.kind == MethodKind::Ewc) {
          next.weights = fisher->values;
          if (anchor) {
            for (std::size_t j = 0; j < next.weights.size(); ++j) next.weights[j] += anchor->weights[j];
          }
        } else {
          next.weights.assign(v.size(), 1.0);
        }
        anchor = std::move(next);
      }
      if (method.kind == MethodKind::Imm) {
        const auto b = model.body();
        bodies.emplace_back(b.begin(), b.end());
        if (fisher) body_fishers.emplace_back(fisher->values.begin(), fisher->values.begin() + static_cast<std::ptrdiff_t>(b.size()));
      }
    }
    if (method.kind == MethodKind::Imm) {
      // bodies are merged; every head comes from the final sequential model
      const auto a = resolve_alphas(method.alphas, T);
      std::vector<std::span<const double>> vs(bodies.begin(), bodies.end()), fs(body_fishers.begin(), body_fishers.end());
      const auto merged = merge_vectors(vs, fs, method.merge, a);
      std::copy(merged.begin(), merged.end(), model.params.values().begin());
      model.lineage.push_back("merge " + method.name() + " bodies of " + std::to_string(T) + " tasks");
    }
  }

  SequenceRun run;
  auto& res = run.result;
  res.method = method.name();
  res.strategy = strategy;
  res.seed = cfg.seed;
  res.final_model_id = model.checkpoint_id();
  res.tasks.resize(T);
  for (std::size_t i = 0; i < T; ++i) res.reference_lit.push_back(references[i].lit);

  parallel_for(
      T,
      [&](std::size_t i) {
        const auto task = static_cast<std::uint32_t>(i);
        const auto view = task_view(model, task);
        const auto& eval = splits[i].eval;
        auto& m = res.tasks[i];
        const auto st = evaluate(view, eval);
        m.mean_nll = st.mean_nll;
        m.accuracy = strategy == HeadStrategy::Union && !multitask
                         ? evaluate(model, to_union_labels(model, task, eval)).accuracy
                         : st.accuracy;
        const std::size_t k = stream_length(cfg, eval);
        m.lia = information_advantage(view, references[i].init, eval, k, preq_for(cfg, "lia" + std::to_string(i))).value;
        m.reference_id = references[i].init.checkpoint_id();
      },
      cfg.preq.jobs);
  for (const auto& m : res.tasks) {
    res.all_past_lia_sum += m.lia;
    res.all_past_accuracy += m.accuracy / static_cast<double>(T);
  }

  const bool one_head = strategy == HeadStrategy::Union || strategy == HeadStrategy::Reuse;
  if (one_head) {
    std::vector<LabeledDataset> parts;
    for (std::size_t i = 0; i < T; ++i) {
      const auto& eval = splits[i].eval;
      auto part = eval.slice(0, stream_length(cfg, eval));
      parts.push_back(strategy == HeadStrategy::Union ? to_union_labels(model, static_cast<std::uint32_t>(i), part) : part);
    }
    // interleave the tasks so the joint stream is not ordered by task
    auto joint = concat(parts);
    const auto perm = root.child("joint-order").permutation(joint.size());
    joint = joint.select(perm);
    ModelState plain_model = model;
    plain_model.parked_heads.clear();
    plain_model.task_rows.clear();
    const auto ref = init_model(model.spec, RngStream(cfg.seed, {"continual", "joint-ref"}));
    res.all_past_lia_joint = information_advantage(plain_model, ref, joint, joint.size(), preq_for(cfg, "joint")).value;
  }

  if (!future.empty()) {
    PREQINFO_CHECK(future.kind == InputKind::Dense && future.input_dim() == cfg.spec.input_dim, IncompatibleError,
                   "future task must share the input dimension");
    const std::size_t ftrain = cfg.future_train_size > 0 ? cfg.future_train_size : cfg.train_size;
    const auto fsplit = split_task(future, ftrain);
    const auto ftask = static_cast<std::uint32_t>(T);
    auto fmodel = reset_head(task_view(model, static_cast<std::uint32_t>(T - 1)), HeadStrategy::Separate, ftask,
                             head_rng, future.num_classes);
    const auto fref = init_model(cfg.spec.with_outputs(future.num_classes), RngStream(cfg.seed, {"continual", "future-ref"}));
    const std::size_t k = stream_length(cfg, fsplit.eval);
    res.future.lia = information_advantage(fmodel, fref, fsplit.eval, k, preq_for(cfg, "future")).value;
    res.future.reference_id = fref.checkpoint_id();
    TrainConfig tc = cfg.train;
    tc.shuffle_seed = root.child("future-train").key();
    const auto trained = train(fmodel, fsplit.train, tc);
    const auto st = evaluate(trained, fsplit.eval);
    res.future.accuracy = st.accuracy;
    res.future.mean_nll = st.mean_nll;
  }
  run.final_model = std::move(model);
  return run;
}

ContinualResult run_sequence(std::span<const LabeledDataset> tasks, const LabeledDataset& future,
                             const MethodSpec& method, HeadStrategy strategy, const ContinualConfig& cfg,
                             std::span<const SingleTaskReference> references) {
  return run_sequence_full(tasks, future, method, strategy, cfg, references).result;
}

RatioKept ratio_kept(const ContinualResult& result, std::span<const double> single_refs) {
  PREQINFO_CHECK(single_refs.size() == result.tasks.size(), InvalidArgument,
                 "ratio_kept needs one reference L_IT per task");
  RatioKept r;
  for (std::size_t i = 0; i < single_refs.size(); ++i) {
    PREQINFO_CHECK(single_refs[i] > 0.0, InvalidArgument,
                   "ratio_kept: reference L_IT of task " + std::to_string(i) + " is not positive");
    const double raw = result.tasks[i].lia / single_refs[i];
    const double clipped = std::clamp(raw, 0.0, 1.1);
    r.ratio.push_back(clipped);
    r.clipped.push_back(clipped != raw);
  }
  return r;
}

HeadRetrain retrain_head(const ModelState& final_model, std::uint32_t task, const LabeledDataset& data,
                         std::size_t train_size, const TrainConfig& cfg) {
  const auto split = split_task(data, train_size);
  const auto view = task_view(final_model, task);
  HeadRetrain r;
  r.before = accuracy(view, split.eval);
  TrainConfig tc = cfg;
  tc.head_only = true;
  tc.penalty.reset();
  const auto retrained = train(view, split.train, tc);
  r.after = accuracy(retrained, split.eval);
  return r;
}

void BlobSuiteSpec::validate() const {
  PREQINFO_CHECK(tasks >= 2, InvalidArgument, "blob suite needs >= 2 tasks");
  PREQINFO_CHECK(classes_per_task >= 2, InvalidArgument, "blob suite needs >= 2 classes per task");
  PREQINFO_CHECK(blobs_per_class >= 1, InvalidArgument, "blob suite needs >= 1 blob per class");
  PREQINFO_CHECK(input_dim >= 1, InvalidArgument, "blob suite needs input_dim >= 1");
  PREQINFO_CHECK(examples_per_task >= 2, InvalidArgument, "blob suite needs >= 2 examples per task");
}

TaskSuite blob_task_suite(const BlobSuiteSpec& spec, RngStream rng) {
  spec.validate();
  const std::size_t per_task = spec.classes_per_task * spec.blobs_per_class;
  auto gen = gen_hier_classification(1, spec.tasks * per_task, spec.input_dim, spec.geometry, 10, rng.child("gm"));
  const auto& gm = std::get<GaussianMixture>(gen.truth);
  TaskSuite suite;
  std::vector<std::size_t> all, all_map;
  for (std::size_t t = 0; t < spec.tasks; ++t) {
    std::vector<std::size_t> blobs, map;
    for (std::size_t j = 0; j < per_task; ++j) {
      blobs.push_back(t * per_task + j);
      map.push_back(j % spec.classes_per_task);
      all.push_back(t * per_task + j);
      all_map.push_back(t * spec.classes_per_task + j % spec.classes_per_task);
    }
    auto raw = sample_mixture(gm, spec.examples_per_task, rng.child("task").child(t), blobs);
    suite.tasks.push_back(subtask(raw, TaskSpec{"task" + std::to_string(t), blobs, map}));
  }
  suite.future = subtask(sample_mixture(gm, spec.examples_per_task, rng.child("future")), TaskSpec{"future", all, all_map});
  return suite;
}

nlohmann::json to_json(const RatioKept& r) {
  std::vector<bool> flags(r.clipped.begin(), r.clipped.end());
  return {{"ratio", r.ratio}, {"clipped", flags}};
}

void write_continual_csv(std::span<const ContinualResult> results, std::ostream& out) {
  std::size_t T = 0;
  for (const auto& r : results) T = std::max(T, r.tasks.size());
  out << "method,head_strategy,seed";
  for (std::size_t i = 0; i < T; ++i) out << ",task" << i << "_accuracy,task" << i << "_lia_knats";
  out << ",all_past_accuracy,all_past_lia_knats,future_accuracy,future_lia_knats\n";
  for (const auto& r : results) {
    out << r.method << ',' << to_string(r.strategy) << ',' << r.seed;
    for (std::size_t i = 0; i < T; ++i) {
      if (i < r.tasks.size()) {
        out << ',' << r.tasks[i].accuracy << ',' << r.tasks[i].lia / 1000.0;
      } else {
        out << ",,";
      }
    }
    out << ',' << r.all_past_accuracy << ',' << r.all_past_lia_sum / 1000.0 << ',' << r.future.accuracy << ','
        << r.future.lia / 1000.0 << '\n';
  }
}

}  // namespace preqinfo
