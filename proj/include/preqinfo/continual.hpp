#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preqinfo/datakit.hpp"
#include "preqinfo/models.hpp"
#include "preqinfo/preqcode.hpp"

namespace preqinfo {

enum class MethodKind { Plain, L2, Ewc, Imm, MultiTask };
enum class ImmMerge { Mean, Mode };
enum class ImmTransfer { Weight, L2 };

struct MethodSpec {
  MethodKind kind = MethodKind::Plain;
  double c = 0.0;                    // l2 / ewc coefficient, or l2-transfer coefficient for imm
  std::size_t fisher_samples = 200;  // ewc and imm-mode
  ImmMerge merge = ImmMerge::Mean;
  ImmTransfer transfer = ImmTransfer::Weight;
  std::vector<double> alphas;  // imm; empty means uniform

  static MethodSpec plain();
  static MethodSpec l2(double c);
  static MethodSpec ewc(double c, std::size_t fisher_samples = 200);
  static MethodSpec imm(ImmMerge merge, ImmTransfer transfer, double c = 0.0, std::vector<double> alphas = {});
  static MethodSpec multitask();

  std::string name() const;
  void validate(std::size_t task_count) const;
  bool needs_fisher() const;
};

struct FisherDiag {
  std::vector<double> values;
  std::size_t samples = 0;
};

/// Mean over sampled (x, y ~ p_model(.|x)) of squared log-likelihood gradients.
FisherDiag estimate_fisher(const ModelState& model, const LabeledDataset& data, std::size_t samples, RngStream rng);

/// Parameters to stay close to, with per-coordinate weights, aligned to one model layout.
struct Anchor {
  std::vector<double> params;
  std::vector<double> weights;
};

/// Re-expresses an anchor built for `before` in the layout of `after`
/// (the same model once reset_head has run). Fresh head coordinates get weight 0.
Anchor align_anchor(const Anchor& anchor, const ModelState& before, const ModelState& after);

ModelState train_task(const ModelState& model, const LabeledDataset& data, const MethodSpec& method,
                      const std::optional<Anchor>& anchor, const TrainConfig& cfg);

/// mean: sum_i a_i theta_i; mode: sum_i a_i F_i theta_i / (sum_i a_i F_i + eps_merge), per coordinate.
inline constexpr double kImmMergeEpsilon = 1e-8;

ModelState imm_merge(std::span<const ModelState> models, std::span<const FisherDiag> fishers, ImmMerge merge,
                     std::span<const double> alphas = {});

struct ContinualConfig {
  ModelSpec spec;  // outputs are set per task
  TrainConfig train{};
  PreqConfig preq{};
  std::size_t train_size = 0;  // examples of each task used for training; the rest is the evaluation stream
  std::size_t k = 0;           // L_IA stream length (0: whole evaluation stream)
  std::size_t future_train_size = 0;
  std::uint64_t seed = 0;
  bool compute_references = true;

  void validate() const;
};

struct TaskMetrics {
  double accuracy = 0.0;
  double mean_nll = 0.0;  // nats
  double lia = 0.0;       // nats, against reference_id
  std::string reference_id;
};

struct ContinualResult {
  std::string method;
  HeadStrategy strategy = HeadStrategy::Separate;
  std::uint64_t seed = 0;
  std::vector<TaskMetrics> tasks;
  double all_past_lia_sum = 0.0;
  std::optional<double> all_past_lia_joint;  // only when one head covers every task
  double all_past_accuracy = 0.0;
  TaskMetrics future;
  std::vector<double> reference_lit;  // L_IT of the single-task models (ratio denominators)
  std::string final_model_id;

  nlohmann::json to_json() const;
};

/// Reference models for the information measures: a random-init model per task
/// (L_IA reference) and the single-task model's L_IT on that task.
struct SingleTaskReference {
  ModelState init;
  ModelState trained;
  double lit = 0.0;
  double accuracy = 0.0;
};

std::vector<SingleTaskReference> single_task_references(std::span<const LabeledDataset> tasks,
                                                        const ContinualConfig& cfg);

ContinualResult run_sequence(std::span<const LabeledDataset> tasks, const LabeledDataset& future,
                             const MethodSpec& method, HeadStrategy strategy, const ContinualConfig& cfg,
                             std::span<const SingleTaskReference> references = {});

/// Also returns the final model, for head retraining.
struct SequenceRun {
  ContinualResult result;
  ModelState final_model;
};

SequenceRun run_sequence_full(std::span<const LabeledDataset> tasks, const LabeledDataset& future,
                              const MethodSpec& method, HeadStrategy strategy, const ContinualConfig& cfg,
                              std::span<const SingleTaskReference> references = {});

struct RatioKept {
  std::vector<double> ratio;
  std::vector<bool> clipped;
};

/// L_IA_i / L_IT_i clipped to [0, 1.1].
RatioKept ratio_kept(const ContinualResult& result, std::span<const double> single_refs);

struct HeadRetrain {
  double before = 0.0;
  double after = 0.0;
};

/// Freezes the body, trains only task `task`'s head on the training split and
/// reports evaluation-stream accuracy before and after.
HeadRetrain retrain_head(const ModelState& final_model, std::uint32_t task, const LabeledDataset& data,
                         std::size_t train_size, const TrainConfig& cfg);

/// Synthetic task sequence: one mixture of tasks x classes_per_task x blobs_per_class
/// Gaussian blobs. Task t owns a consecutive block of blobs, labelled blob mod classes_per_task,
/// so every class is multimodal. The future task classifies all blocks jointly.
struct BlobSuiteSpec {
  std::size_t tasks = 4;
  std::size_t classes_per_task = 3;
  std::size_t blobs_per_class = 2;
  std::size_t input_dim = 16;
  HierGeometry geometry{};
  std::size_t examples_per_task = 4000;

  void validate() const;
};

struct TaskSuite {
  std::vector<LabeledDataset> tasks;
  LabeledDataset future;
};

TaskSuite blob_task_suite(const BlobSuiteSpec& spec, RngStream rng);

nlohmann::json to_json(const RatioKept& r);
/// Table-2 style CSV: one row per result.
void write_continual_csv(std::span<const ContinualResult> results, std::ostream& out);

}  // namespace preqinfo
