#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "preqinfo/datakit.hpp"
#include "preqinfo/numkit.hpp"
#include "preqinfo/rng.hpp"

namespace preqinfo {

enum class ModelKind : std::uint32_t { SoftmaxRegression = 1, Mlp = 2, BigramLm = 3 };

/// Architecture of a categorical predictor p(y|x). For bigram-lm, input_dim is
/// the vocabulary, hidden the embedding width and outputs == input_dim.
struct ModelSpec {
  ModelKind kind = ModelKind::SoftmaxRegression;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;

  static ModelSpec softmax_regression(std::size_t d_in, std::size_t classes);
  static ModelSpec mlp(std::size_t d_in, std::size_t hidden, std::size_t classes);
  static ModelSpec bigram_lm(std::size_t vocab, std::size_t embed_dim);

  std::size_t head_inputs() const;
  std::size_t body_param_count() const;
  std::size_t param_count() const;
  std::vector<ParamBlock> layout() const;
  InputKind input_kind() const;
  ModelSpec with_outputs(std::size_t classes) const;
  void validate() const;
  std::string describe() const;

  bool operator==(const ModelSpec&) const = default;
};

/// The final affine layer (weights then bias) as a range of the flat parameters.
struct HeadSlice {
  std::size_t offset = 0;
  std::size_t length = 0;
};

enum class HeadStrategy { Separate, Union, Reuse };

HeadStrategy parse_head_strategy(const std::string& name);
std::string to_string(HeadStrategy s);

struct ParkedHead {
  std::size_t outputs = 0;
  std::vector<double> values;  // weights (outputs x head_inputs) then bias
};

/// Rows of a union head owned by one task.
struct TaskRows {
  std::uint32_t task = 0;
  std::size_t first = 0;
  std::size_t count = 0;
};

struct ModelState {
  ModelSpec spec;
  ParamVector params;
  HeadSlice head;
  std::uint64_t init_seed = 0;
  std::vector<std::string> lineage;

  std::optional<std::uint32_t> active_task;
  std::map<std::uint32_t, ParkedHead> parked_heads;  // separate strategy
  std::vector<TaskRows> task_rows;                   // union strategy

  /// True once any training event is in the lineage.
  bool trained() const;
  std::span<const double> body() const { return params.values().subspan(0, head.offset); }
  std::span<const double> head_values() const { return params.values().subspan(head.offset, head.length); }
  std::uint64_t fingerprint() const;
  std::string checkpoint_id() const;
};

ModelState init_model(const ModelSpec& spec, RngStream rng);

/// Scratch buffers reused across forward/backward calls.
struct Workspace {
  std::vector<double> hidden;
  std::vector<double> logits;
  std::vector<double> grad_logits;
  std::vector<double> grad_hidden;
};

void forward_logits(const ModelState& model, std::span<const double> x, Workspace& ws);
/// NLL of one example; accumulates d(NLL)/d(params) into grad (skipped when empty).
double example_loss_grad(const ModelState& model, std::span<const double> x, std::size_t label,
                         std::span<double> grad, Workspace& ws, bool head_only, bool* clamped);

std::vector<double> predict_log_probs(const ModelState& model, std::span<const double> x);

struct EvalStats {
  double total_nll = 0.0;  // nats
  double mean_nll = 0.0;
  double accuracy = 0.0;
  std::size_t clamps = 0;
  std::size_t count = 0;
};

EvalStats evaluate(const ModelState& model, const LabeledDataset& data, std::size_t begin = 0,
                   std::size_t end = SIZE_MAX);
double mean_nll(const ModelState& model, const LabeledDataset& data);
double accuracy(const ModelState& model, const LabeledDataset& data);
/// Per-example -log p(y|x) over [begin, end).
std::vector<double> example_costs(const ModelState& model, const LabeledDataset& data, std::size_t begin,
                                  std::size_t end, std::size_t* clamps = nullptr);

void check_compatible(const ModelState& model, const LabeledDataset& data);

struct PenaltyTerm {
  std::vector<double> anchor;
  std::vector<double> weights;
  double coefficient = 0.0;
};

/// (c/2) * sum_j w_j (theta_j - a_j)^2
double penalty_value(std::span<const double> params, const PenaltyTerm& p);
void penalty_gradient(std::span<const double> params, const PenaltyTerm& p, std::span<double> grad);

struct TrainConfig {
  OptimizerHyper optimizer{};
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
  double heldout_fraction = 0.1;
  std::size_t min_heldout = 16;
  std::optional<PenaltyTerm> penalty;
  std::uint64_t shuffle_seed = 0;
  bool head_only = false;

  void validate() const;
  /// Examples carved out for early stopping from a training set of size n.
  std::size_t heldout_size(std::size_t n) const;
};

struct TrainOutcome {
  ModelState model;
  double best_heldout_nll = 0.0;  // NaN when no heldout slice could be carved
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::size_t heldout_size = 0;
};

/// Minibatch training with early stopping on a seeded heldout slice; returns the
/// best-heldout snapshot.
TrainOutcome fit(const ModelState& model, const LabeledDataset& data, const TrainConfig& cfg,
                 const std::string& label = "train");
/// Same, with the early-stopping examples given explicitly (sorted, unique, < data.size()).
TrainOutcome fit(const ModelState& model, const LabeledDataset& data, const TrainConfig& cfg, const std::string& label,
                 std::span<const std::size_t> heldout);
ModelState train(const ModelState& model, const LabeledDataset& data, const TrainConfig& cfg);

// ---- head management ----------------------------------------------------

/// Prepares the head for `task`. `outputs` defaults to the current head size.
ModelState reset_head(const ModelState& model, HeadStrategy strategy, std::uint32_t task, RngStream rng,
                      std::optional<std::size_t> outputs = std::nullopt);
/// Plain model whose head predicts only `task`'s labels.
ModelState task_view(const ModelState& model, std::uint32_t task);
/// Relabels task data into the union head's label space.
LabeledDataset to_union_labels(const ModelState& model, std::uint32_t task, const LabeledDataset& data);

// ---- checkpoints --------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const ModelState& model, std::ostream& out);
ModelState read_checkpoint(std::istream& in);
void save_checkpoint(const ModelState& model, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace preqinfo
