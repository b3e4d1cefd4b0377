#include "preqinfo/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "preqinfo/error.hpp"

namespace preqinfo {

// ---- ModelSpec ------------------------------------------------------------

ModelSpec ModelSpec::softmax_regression(std::size_t d_in, std::size_t classes) {
  return {ModelKind::SoftmaxRegression, d_in, 0, classes};
}

ModelSpec ModelSpec::mlp(std::size_t d_in, std::size_t hidden, std::size_t classes) {
  return {ModelKind::Mlp, d_in, hidden, classes};
}

ModelSpec ModelSpec::bigram_lm(std::size_t vocab, std::size_t embed_dim) {
  return {ModelKind::BigramLm, vocab, embed_dim, vocab};
}

std::size_t ModelSpec::head_inputs() const {
  return kind == ModelKind::SoftmaxRegression ? input_dim : hidden;
}

std::size_t ModelSpec::body_param_count() const {
  switch (kind) {
    case ModelKind::SoftmaxRegression: return 0;
    case ModelKind::Mlp: return hidden * input_dim + hidden;
    case ModelKind::BigramLm: return input_dim * hidden;
  }
  return 0;
}

std::size_t ModelSpec::param_count() const { return body_param_count() + outputs * head_inputs() + outputs; }

std::vector<ParamBlock> ModelSpec::layout() const {
  std::vector<ParamBlock> blocks;
  std::size_t off = 0;
  auto add = [&](std::string name, std::size_t r, std::size_t c) {
    blocks.push_back({std::move(name), off, r, c});
    off += r * c;
  };
  if (kind == ModelKind::Mlp) {
    add("body.W1", hidden, input_dim);
    add("body.b1", hidden, 1);
  } else if (kind == ModelKind::BigramLm) {
    add("body.E", input_dim, hidden);
  }
  add("head.W", outputs, head_inputs());
  add("head.b", outputs, 1);
  return blocks;
}

InputKind ModelSpec::input_kind() const { return kind == ModelKind::BigramLm ? InputKind::Token : InputKind::Dense; }

ModelSpec ModelSpec::with_outputs(std::size_t classes) const {
  ModelSpec s = *this;
  s.outputs = classes;
  return s;
}

void ModelSpec::validate() const {
  PREQINFO_CHECK(input_dim >= 1 && outputs >= 1, InvalidArgument, "model spec needs input_dim and outputs >= 1");
  if (kind != ModelKind::SoftmaxRegression) PREQINFO_CHECK(hidden >= 1, InvalidArgument, "model spec needs hidden >= 1");
}

std::string ModelSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case ModelKind::SoftmaxRegression: os << "softmax-regression(" << input_dim << "," << outputs << ")"; break;
    case ModelKind::Mlp: os << "mlp(" << input_dim << "," << hidden << "," << outputs << ")"; break;
    case ModelKind::BigramLm: os << "bigram-lm(" << input_dim << "," << hidden << ")"; break;
  }
  return os.str();
}

HeadStrategy parse_head_strategy(const std::string& name) {
  if (name == "separate") return HeadStrategy::Separate;
  if (name == "union") return HeadStrategy::Union;
  if (name == "reuse") return HeadStrategy::Reuse;
  throw InvalidArgument("unknown head strategy: " + name);
}

std::string to_string(HeadStrategy s) {
  switch (s) {
    case HeadStrategy::Separate: return "separate";
    case HeadStrategy::Union: return "union";
    case HeadStrategy::Reuse: return "reuse";
  }
  return "?";
}

// ---- ModelState -----------------------------------------------------------

bool ModelState::trained() const {
  static const char* kTrainedPrefixes[] = {"train", "segment", "final", "load", "merge"};
  return std::any_of(lineage.begin(), lineage.end(), [](const std::string& e) {
    return std::any_of(std::begin(kTrainedPrefixes), std::end(kTrainedPrefixes),
                       [&](const char* p) { return e.rfind(p, 0) == 0; });
  });
}

std::uint64_t ModelState::fingerprint() const {
  auto v = params.values();
  std::uint64_t h = fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)));
  h = fnv1a64(spec.describe(), h);
  for (const auto& [task, parked] : parked_heads) {
    h = fnv1a64(std::to_string(task), h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(parked.values.data()),
                                 parked.values.size() * sizeof(double)),
                h);
  }
  return h;
}

std::string ModelState::checkpoint_id() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fingerprint();
  return os.str();
}

namespace {

void init_head_values(std::span<double> head, std::size_t outputs, std::size_t fan_in, RngStream& rng) {
  // small head so a fresh model starts near the uniform prediction
  const double scale = 0.1 * std::sqrt(3.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < outputs * fan_in; ++i) head[i] = rng.uniform(-scale, scale);
  for (std::size_t i = outputs * fan_in; i < head.size(); ++i) head[i] = 0.0;
}

HeadSlice head_slice_of(const ModelSpec& spec) {
  return {spec.body_param_count(), spec.outputs * spec.head_inputs() + spec.outputs};
}

}  // namespace

ModelState init_model(const ModelSpec& spec, RngStream rng) {
  spec.validate();
  ModelState m;
  m.spec = spec;
  m.params = ParamVector(spec.layout());
  m.head = head_slice_of(spec);
  m.init_seed = rng.key();
  auto body_rng = rng.child("body");
  if (spec.kind == ModelKind::Mlp) {
    const double s = std::sqrt(3.0 / static_cast<double>(spec.input_dim));
    for (auto& w : m.params.block_values("body.W1")) w = body_rng.uniform(-s, s);
  } else if (spec.kind == ModelKind::BigramLm) {
    for (auto& w : m.params.block_values("body.E")) w = body_rng.uniform(-1.0, 1.0);
  }
  auto head_rng = rng.child("head");
  init_head_values(m.params.values().subspan(m.head.offset, m.head.length), spec.outputs, spec.head_inputs(),
                   head_rng);
  m.lineage.push_back("init " + spec.describe() + " key=" + std::to_string(m.init_seed));
  return m;
}

// ---- forward / backward ---------------------------------------------------

void forward_logits(const ModelState& model, std::span<const double> x, Workspace& ws) {
  const auto& spec = model.spec;
  const auto& p = model.params;
  ws.logits.resize(spec.outputs);
  const auto head_W = MatrixView{p.values().subspan(model.head.offset, spec.outputs * spec.head_inputs()),
                                 spec.outputs, spec.head_inputs()};
  const auto head_b = p.values().subspan(model.head.offset + spec.outputs * spec.head_inputs(), spec.outputs);
  switch (spec.kind) {
    case ModelKind::SoftmaxRegression:
      affine_forward(x, head_W, head_b, ws.logits);
      return;
    case ModelKind::Mlp: {
      ws.hidden.resize(spec.hidden);
      const auto W1 = MatrixView{p.values().subspan(0, spec.hidden * spec.input_dim), spec.hidden, spec.input_dim};
      const auto b1 = p.values().subspan(spec.hidden * spec.input_dim, spec.hidden);
      affine_forward(x, W1, b1, ws.hidden);
      tanh_forward(ws.hidden, ws.hidden);
      affine_forward(ws.hidden, head_W, head_b, ws.logits);
      return;
    }
    case ModelKind::BigramLm: {
      const auto token = static_cast<std::size_t>(x[0]);
      PREQINFO_CHECK(token < spec.input_dim, DimensionError, "token id exceeds vocabulary");
      auto e = p.values().subspan(token * spec.hidden, spec.hidden);
      ws.hidden.assign(e.begin(), e.end());
      affine_forward(ws.hidden, head_W, head_b, ws.logits);
      return;
    }
  }
}

double example_loss_grad(const ModelState& model, std::span<const double> x, std::size_t label,
                         std::span<double> grad, Workspace& ws, bool head_only, bool* clamped) {
  forward_logits(model, x, ws);
  const auto& spec = model.spec;
  if (grad.empty()) return softmax_nll_into(ws.logits, label, {}, clamped);

  ws.grad_logits.resize(spec.outputs);
  const double loss = softmax_nll_into(ws.logits, label, ws.grad_logits, clamped);
  const std::size_t hw = spec.outputs * spec.head_inputs();
  const auto head_W = MatrixView{model.params.values().subspan(model.head.offset, hw), spec.outputs, spec.head_inputs()};
  auto g_W = grad.subspan(model.head.offset, hw);
  auto g_b = grad.subspan(model.head.offset + hw, spec.outputs);
  const std::span<const double> head_in = spec.kind == ModelKind::SoftmaxRegression ? x : std::span<const double>(ws.hidden);
  const bool body = !head_only && spec.kind != ModelKind::SoftmaxRegression;
  if (body) ws.grad_hidden.resize(spec.hidden);
  affine_backward(head_in, head_W, ws.grad_logits, g_W, g_b, body ? std::span<double>(ws.grad_hidden) : std::span<double>());
  if (!body) return loss;

  if (spec.kind == ModelKind::Mlp) {
    tanh_backward(ws.hidden, ws.grad_hidden, ws.grad_hidden);
    const auto W1 = MatrixView{model.params.values().subspan(0, spec.hidden * spec.input_dim), spec.hidden,
                               spec.input_dim};
    affine_backward(x, W1, ws.grad_hidden, grad.subspan(0, spec.hidden * spec.input_dim),
                    grad.subspan(spec.hidden * spec.input_dim, spec.hidden), {});
  } else {
    const auto token = static_cast<std::size_t>(x[0]);
    auto g_e = grad.subspan(token * spec.hidden, spec.hidden);
    for (std::size_t i = 0; i < spec.hidden; ++i) g_e[i] += ws.grad_hidden[i];
  }
  return loss;
}

std::vector<double> predict_log_probs(const ModelState& model, std::span<const double> x) {
  const std::size_t expected = model.spec.kind == ModelKind::BigramLm ? 1 : model.spec.input_dim;
  PREQINFO_CHECK(x.size() == expected, DimensionError, "predict_log_probs: input shape mismatch");
  Workspace ws;
  forward_logits(model, x, ws);
  const double lse = log_sum_exp(ws.logits);
  for (auto& z : ws.logits) z -= lse;
  return ws.logits;
}

void check_compatible(const ModelState& model, const LabeledDataset& data) {
  const auto& s = model.spec;
  PREQINFO_CHECK(data.kind == s.input_kind(), IncompatibleError, "dataset input kind does not match model");
  if (s.kind == ModelKind::BigramLm) {
    PREQINFO_CHECK(data.input_dim() == 1, IncompatibleError, "token dataset must have one column");
  } else {
    PREQINFO_CHECK(data.input_dim() == s.input_dim, IncompatibleError,
                   "dataset input_dim " + std::to_string(data.input_dim()) + " != model input_dim " +
                       std::to_string(s.input_dim));
  }
  PREQINFO_CHECK(data.num_classes == s.outputs, IncompatibleError,
                 "dataset K " + std::to_string(data.num_classes) + " != model outputs " + std::to_string(s.outputs));
}

EvalStats evaluate(const ModelState& model, const LabeledDataset& data, std::size_t begin, std::size_t end) {
  check_compatible(model, data);
  end = std::min(end, data.size());
  EvalStats st;
  Workspace ws;
  std::size_t correct = 0;
  for (std::size_t i = begin; i < end; ++i) {
    bool clamped = false;
    st.total_nll += example_loss_grad(model, data.input(i), data.labels[i], {}, ws, false, &clamped);
    st.clamps += clamped ? 1 : 0;
    const auto best = static_cast<std::size_t>(std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin());
    correct += best == data.labels[i] ? 1 : 0;
  }
  st.count = end > begin ? end - begin : 0;
  if (st.count > 0) {
    st.mean_nll = st.total_nll / static_cast<double>(st.count);
    st.accuracy = static_cast<double>(correct) / static_cast<double>(st.count);
  }
  return st;
}

double mean_nll(const ModelState& model, const LabeledDataset& data) {
  PREQINFO_CHECK(!data.empty(), InvalidArgument, "mean_nll of an empty dataset");
  return evaluate(model, data).mean_nll;
}

double accuracy(const ModelState& model, const LabeledDataset& data) {
  PREQINFO_CHECK(!data.empty(), InvalidArgument, "accuracy of an empty dataset");
  return evaluate(model, data).accuracy;
}

std::vector<double> example_costs(const ModelState& model, const LabeledDataset& data, std::size_t begin,
                                  std::size_t end, std::size_t* clamps) {
  check_compatible(model, data);
  PREQINFO_CHECK(begin <= end && end <= data.size(), InvalidArgument, "example_costs range out of bounds");
  std::vector<double> out;
  out.reserve(end - begin);
  Workspace ws;
  std::size_t c = 0;
  for (std::size_t i = begin; i < end; ++i) {
    bool clamped = false;
    out.push_back(example_loss_grad(model, data.input(i), data.labels[i], {}, ws, false, &clamped));
    c += clamped ? 1 : 0;
  }
  if (clamps) *clamps = c;
  return out;
}

// ---- penalty & training ---------------------------------------------------

double penalty_value(std::span<const double> params, const PenaltyTerm& p) {
  PREQINFO_CHECK(p.anchor.size() == params.size() && p.weights.size() == params.size(), DimensionError,
                 "penalty anchor/weights do not match parameter count");
  double s = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double d = params[j] - p.anchor[j];
    s += p.weights[j] * d * d;
  }
  return 0.5 * p.coefficient * s;
}

void penalty_gradient(std::span<const double> params, const PenaltyTerm& p, std::span<double> grad) {
  PREQINFO_CHECK(p.anchor.size() == params.size() && p.weights.size() == params.size() && grad.size() == params.size(),
                 DimensionError, "penalty anchor/weights do not match parameter count");
  for (std::size_t j = 0; j < params.size(); ++j) grad[j] += p.coefficient * p.weights[j] * (params[j] - p.anchor[j]);
}

void TrainConfig::validate() const {
  PREQINFO_CHECK(batch_size >= 1, InvalidArgument, "batch size must be >= 1");
  PREQINFO_CHECK(heldout_fraction > 0.0 && heldout_fraction < 1.0, InvalidArgument,
                 "heldout fraction must lie in (0, 1)");
  PREQINFO_CHECK(optimizer.learning_rate >= 0.0 && std::isfinite(optimizer.learning_rate), InvalidArgument,
                 "learning rate must be finite and >= 0");
  if (penalty) {
    PREQINFO_CHECK(penalty->coefficient >= 0.0 && std::isfinite(penalty->coefficient), InvalidArgument,
                   "penalty coefficient must be finite and >= 0");
  }
}

std::size_t TrainConfig::heldout_size(std::size_t n) const {
  if (n < 2) return 0;
  auto h = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(n)));
  h = std::max(h, min_heldout);
  return std::min(h, n / 2);
}

namespace {

double heldout_nll(const ModelState& m, const LabeledDataset& data, const std::vector<std::size_t>& idx, Workspace& ws) {
  double s = 0.0;
  for (auto i : idx) s += example_loss_grad(m, data.input(i), data.labels[i], {}, ws, false, nullptr);
  return s / static_cast<double>(idx.size());
}

}  // namespace

TrainOutcome fit(const ModelState& model, const LabeledDataset& data, const TrainConfig& cfg, const std::string& label) {
  PREQINFO_CHECK(!data.empty(), InvalidArgument, "train: empty dataset");
  cfg.validate();
  const std::size_t n = data.size();
  auto perm = RngStream(cfg.shuffle_seed, {label, "heldout"}).permutation(n);
  std::vector<std::size_t> heldout(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cfg.heldout_size(n)));
  std::sort(heldout.begin(), heldout.end());
  return fit(model, data, cfg, label, heldout);
}

TrainOutcome fit(const ModelState& model, const LabeledDataset& data, const TrainConfig& cfg, const std::string& label,
                 std::span<const std::size_t> heldout_idx) {
  PREQINFO_CHECK(!data.empty(), InvalidArgument, "train: empty dataset");
  check_compatible(model, data);
  cfg.validate();
  if (cfg.penalty) {
    PREQINFO_CHECK(cfg.penalty->anchor.size() == model.params.size(), DimensionError,
                   "train: penalty anchor does not match model parameters");
  }
  const std::size_t n = data.size();
  std::vector<std::size_t> heldout(heldout_idx.begin(), heldout_idx.end()), fit_idx;
  PREQINFO_CHECK(std::is_sorted(heldout.begin(), heldout.end()) &&
                     std::adjacent_find(heldout.begin(), heldout.end()) == heldout.end() &&
                     (heldout.empty() || heldout.back() < n),
                 InvalidArgument, "train: heldout indices must be sorted, unique and in range");
  PREQINFO_CHECK(heldout.size() < n, InvalidArgument, "train: heldout leaves no training example");
  for (std::size_t i = 0, h = 0; i < n; ++i) {
    if (h < heldout.size() && heldout[h] == i) {
      ++h;
    } else {
      fit_idx.push_back(i);
    }
  }
  const std::size_t held = heldout.size();
  RngStream rng(cfg.shuffle_seed, {label});

  TrainOutcome out;
  out.heldout_size = held;
  ModelState cur = model;
  Workspace ws;
  double best = held > 0 ? heldout_nll(cur, data, heldout, ws) : std::numeric_limits<double>::quiet_NaN();
  std::vector<double> best_params(cur.params.values().begin(), cur.params.values().end());

  const std::size_t P = cur.params.size();
  OptimizerState opt(cfg.optimizer, P);
  std::vector<double> grad(P, 0.0);
  const std::size_t mask_begin = cfg.head_only ? cur.head.offset : 0;
  const std::size_t epochs = held > 0 ? cfg.max_epochs : std::min(cfg.max_epochs, cfg.patience);
  std::size_t since_best = 0;
  auto epoch_rng = rng.child("epochs");

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    epoch_rng.shuffle(fit_idx);
    for (std::size_t start = 0; start < fit_idx.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, fit_idx.size());
      std::fill(grad.begin() + static_cast<std::ptrdiff_t>(mask_begin), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const auto i = fit_idx[b];
        example_loss_grad(cur, data.input(i), data.labels[i], grad, ws, cfg.head_only, nullptr);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t j = mask_begin; j < P; ++j) grad[j] *= inv;
      if (cfg.penalty && cfg.penalty->coefficient > 0.0) {
        const auto& pen = *cfg.penalty;
        auto v = cur.params.values();
        for (std::size_t j = mask_begin; j < P; ++j) grad[j] += pen.coefficient * pen.weights[j] * (v[j] - pen.anchor[j]);
      }
      optimizer_step(cur.params.values(), grad, opt, mask_begin, P);
    }
    out.epochs_run = epoch;
    if (held == 0) continue;
    const double h = heldout_nll(cur, data, heldout, ws);
    if (h < best) {
      best = h;
      best_params.assign(cur.params.values().begin(), cur.params.values().end());
      out.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (held > 0) {
    std::copy(best_params.begin(), best_params.end(), cur.params.values().begin());
  } else {
    out.best_epoch = out.epochs_run;
  }
  PREQINFO_CHECK(all_finite(cur.params.values()), Error, "training produced non-finite parameters");
  out.best_heldout_nll = best;
  std::ostringstream ev;
  ev << label << " n=" << n << " epochs=" << out.epochs_run << " best_epoch=" << out.best_epoch
     << " data=" << std::hex << data.fingerprint();
  cur.lineage.push_back(ev.str());
  out.model = std::move(cur);
  return out;
}

ModelState train(const ModelState& model, const LabeledDataset& data, const TrainConfig& cfg) {
  return fit(model, data, cfg).model;
}

// ---- heads ----------------------------------------------------------------

namespace {

ModelState with_head(const ModelState& model, std::size_t outputs, std::span<const double> head) {
  ModelState m = model;
  m.spec = model.spec.with_outputs(outputs);
  std::vector<double> values(model.body().begin(), model.body().end());
  values.insert(values.end(), head.begin(), head.end());
  m.params = ParamVector(m.spec.layout(), std::move(values));
  m.head = head_slice_of(m.spec);
  return m;
}

std::vector<double> fresh_head(const ModelSpec& spec, std::size_t outputs, RngStream& rng) {
  std::vector<double> head(outputs * spec.head_inputs() + outputs);
  init_head_values(head, outputs, spec.head_inputs(), rng);
  return head;
}

}  // namespace

ModelState reset_head(const ModelState& model, HeadStrategy strategy, std::uint32_t task, RngStream rng,
                      std::optional<std::size_t> outputs) {
  const std::size_t k = outputs.value_or(model.spec.outputs);
  PREQINFO_CHECK(k >= 1, InvalidArgument, "reset_head: outputs must be >= 1");
  auto head_rng = rng.child("head").child(task);
  switch (strategy) {
    case HeadStrategy::Reuse: {
      PREQINFO_CHECK(k == model.spec.outputs, IncompatibleError, "reuse strategy cannot change the head size");
      ModelState m = model;
      m.active_task = task;
      m.lineage.push_back("reset_head reuse task=" + std::to_string(task));
      return m;
    }
    case HeadStrategy::Separate: {
      if (model.active_task == task) return model;
      if (!model.active_task && k == model.spec.outputs) {
        ModelState m = model;
        m.active_task = task;
        return m;
      }
      ModelState m;
      if (auto it = model.parked_heads.find(task); it != model.parked_heads.end()) {
        m = with_head(model, it->second.outputs, it->second.values);
        m.parked_heads.erase(task);
      } else {
        m = with_head(model, k, fresh_head(model.spec, k, head_rng));
      }
      if (model.active_task) {
        auto hv = model.head_values();
        m.parked_heads[*model.active_task] = ParkedHead{model.spec.outputs, {hv.begin(), hv.end()}};
      }
      m.active_task = task;
      m.lineage.push_back("reset_head separate task=" + std::to_string(task));
      return m;
    }
    case HeadStrategy::Union: {
      for (const auto& tr : model.task_rows) {
        if (tr.task == task) {
          ModelState m = model;
          m.active_task = task;
          return m;
        }
      }
      if (model.task_rows.empty() && !model.active_task && k == model.spec.outputs) {
        ModelState m = model;
        m.task_rows.push_back({task, 0, k});
        m.active_task = task;
        return m;
      }
      const auto& spec = model.spec;
      const std::size_t old_k = spec.outputs, fan = spec.head_inputs(), new_k = old_k + k;
      auto old_head = model.head_values();
      auto extra = fresh_head(spec, k, head_rng);
      std::vector<double> head(new_k * fan + new_k);
      std::copy(old_head.begin(), old_head.begin() + static_cast<std::ptrdiff_t>(old_k * fan), head.begin());
      std::copy(extra.begin(), extra.begin() + static_cast<std::ptrdiff_t>(k * fan),
                head.begin() + static_cast<std::ptrdiff_t>(old_k * fan));
      std::copy(old_head.begin() + static_cast<std::ptrdiff_t>(old_k * fan), old_head.end(),
                head.begin() + static_cast<std::ptrdiff_t>(new_k * fan));
      std::copy(extra.begin() + static_cast<std::ptrdiff_t>(k * fan), extra.end(),
                head.begin() + static_cast<std::ptrdiff_t>(new_k * fan + old_k));
      ModelState m = with_head(model, new_k, head);
      if (m.task_rows.empty() && model.active_task) m.task_rows.push_back({*model.active_task, 0, old_k});
      m.task_rows.push_back({task, old_k, k});
      m.active_task = task;
      m.lineage.push_back("reset_head union task=" + std::to_string(task));
      return m;
    }
  }
  throw InvalidArgument("unknown head strategy");
}

ModelState task_view(const ModelState& model, std::uint32_t task) {
  ModelState m;
  if (auto it = model.parked_heads.find(task); it != model.parked_heads.end()) {
    m = with_head(model, it->second.outputs, it->second.values);
  } else if (!model.task_rows.empty()) {
    const TaskRows* tr = nullptr;
    for (const auto& r : model.task_rows) {
      if (r.task == task) tr = &r;
    }
    PREQINFO_CHECK(tr != nullptr, InvalidArgument, "task_view: model has no head for task " + std::to_string(task));
    const std::size_t fan = model.spec.head_inputs(), k = model.spec.outputs;
    auto hv = model.head_values();
    std::vector<double> head;
    head.insert(head.end(), hv.begin() + static_cast<std::ptrdiff_t>(tr->first * fan),
                hv.begin() + static_cast<std::ptrdiff_t>((tr->first + tr->count) * fan));
    head.insert(head.end(), hv.begin() + static_cast<std::ptrdiff_t>(k * fan + tr->first),
                hv.begin() + static_cast<std::ptrdiff_t>(k * fan + tr->first + tr->count));
    m = with_head(model, tr->count, head);
  } else {
    PREQINFO_CHECK(!model.active_task || *model.active_task == task || model.parked_heads.empty(), InvalidArgument,
                   "task_view: model has no head for task " + std::to_string(task));
    m = model;
  }
  m.parked_heads.clear();
  m.task_rows.clear();
  m.active_task = task;
  return m;
}

LabeledDataset to_union_labels(const ModelState& model, std::uint32_t task, const LabeledDataset& data) {
  for (const auto& tr : model.task_rows) {
    if (tr.task != task) continue;
    PREQINFO_CHECK(data.num_classes == tr.count, IncompatibleError, "task data K does not match its union rows");
    LabeledDataset out = data;
    for (auto& y : out.labels) y = static_cast<std::uint32_t>(y + tr.first);
    out.num_classes = model.spec.outputs;
    return out;
  }
  if (model.task_rows.empty()) return data;
  throw InvalidArgument("to_union_labels: task " + std::to_string(task) + " has no union rows");
}

// ---- checkpoints ----------------------------------------------------------

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char b[sizeof(T)];
  in.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!in) throw ParseError(ParseError::Kind::Truncated, "checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void put_doubles(std::ostream& out, std::span<const double> v) {
  put<std::uint64_t>(out, v.size());
  for (double d : v) put<double>(out, d);
}

std::vector<double> get_doubles(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ULL << 32)) throw ParseError(ParseError::Kind::BadValue, "checkpoint array too large");
  std::vector<double> v(n);
  for (auto& d : v) d = get<double>(in);
  return v;
}

}  // namespace

void write_checkpoint(const ModelState& model, std::ostream& out) {
  out.write("PQNF", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.spec.kind));
  put<std::uint64_t>(out, model.spec.input_dim);
  put<std::uint64_t>(out, model.spec.hidden);
  put<std::uint64_t>(out, model.spec.outputs);
  put<std::uint64_t>(out, model.init_seed);
  put_doubles(out, model.params.values());
  put<std::uint8_t>(out, model.active_task ? 1 : 0);
  put<std::uint32_t>(out, model.active_task.value_or(0));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.parked_heads.size()));
  for (const auto& [task, parked] : model.parked_heads) {
    put<std::uint32_t>(out, task);
    put<std::uint64_t>(out, parked.outputs);
    put_doubles(out, parked.values);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.task_rows.size()));
  for (const auto& tr : model.task_rows) {
    put<std::uint32_t>(out, tr.task);
    put<std::uint64_t>(out, tr.first);
    put<std::uint64_t>(out, tr.count);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.lineage.size()));
  for (const auto& e : model.lineage) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.size()));
    out.write(e.data(), static_cast<std::streamsize>(e.size()));
  }
}

ModelState read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in) throw ParseError(ParseError::Kind::Truncated, "checkpoint truncated");
  if (std::string_view(magic, 4) != "PQNF") throw ParseError(ParseError::Kind::BadMagic, "not a PQNF checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ParseError(ParseError::Kind::BadValue, "unsupported checkpoint version " + std::to_string(version));
  }
  ModelState m;
  const auto kind = get<std::uint32_t>(in);
  if (kind < 1 || kind > 3) throw ParseError(ParseError::Kind::BadValue, "unknown model kind");
  m.spec.kind = static_cast<ModelKind>(kind);
  m.spec.input_dim = get<std::uint64_t>(in);
  m.spec.hidden = get<std::uint64_t>(in);
  m.spec.outputs = get<std::uint64_t>(in);
  m.init_seed = get<std::uint64_t>(in);
  auto values = get_doubles(in);
  if (values.size() != m.spec.param_count()) {
    throw ParseError(ParseError::Kind::CountMismatch, "checkpoint parameter count does not match spec");
  }
  m.params = ParamVector(m.spec.layout(), std::move(values));
  m.head = head_slice_of(m.spec);
  const auto has_task = get<std::uint8_t>(in);
  const auto task = get<std::uint32_t>(in);
  if (has_task) m.active_task = task;
  const auto parked = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < parked; ++i) {
    const auto t = get<std::uint32_t>(in);
    ParkedHead ph;
    ph.outputs = get<std::uint64_t>(in);
    ph.values = get_doubles(in);
    m.parked_heads[t] = std::move(ph);
  }
  const auto rows = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < rows; ++i) {
    TaskRows tr;
    tr.task = get<std::uint32_t>(in);
    tr.first = get<std::uint64_t>(in);
    tr.count = get<std::uint64_t>(in);
    m.task_rows.push_back(tr);
  }
  const auto events = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < events; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string e(len, '\0');
    in.read(e.data(), len);
    if (!in) throw ParseError(ParseError::Kind::Truncated, "checkpoint truncated");
    m.lineage.push_back(std::move(e));
  }
  return m;
}

void save_checkpoint(const ModelState& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(ParseError::Kind::Io, "cannot write " + path.string());
  write_checkpoint(model, out);
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseError::Kind::Io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace preqinfo
