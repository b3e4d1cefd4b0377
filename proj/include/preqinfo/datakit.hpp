#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "preqinfo/numkit.hpp"
#include "preqinfo/rng.hpp"

namespace preqinfo {

enum class InputKind { Dense, Token };

/// Ordered labelled examples. Token inputs are stored as a one-column matrix of ids.
struct LabeledDataset {
  InputKind kind = InputKind::Dense;
  Matrix inputs;
  std::vector<std::uint32_t> labels;
  std::size_t num_classes = 0;
  // permutation applied at creation: example i came from generated position order[i]
  std::vector<std::size_t> order;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::size_t input_dim() const noexcept { return inputs.cols(); }
  std::span<const double> input(std::size_t i) const { return inputs.row(i); }
  std::uint32_t token(std::size_t i) const { return static_cast<std::uint32_t>(inputs(i, 0)); }

  /// Examples [begin, end) in order; meta records the slice.
  LabeledDataset slice(std::size_t begin, std::size_t end) const;
  LabeledDataset select(std::span<const std::size_t> indices) const;
  void validate() const;
  /// Content hash over inputs, labels and K.
  std::uint64_t fingerprint() const;
};

LabeledDataset concat(std::span<const LabeledDataset> parts);

struct BigramTable {
  std::size_t vocab = 0;
  Matrix rows;  // V x V row-stochastic
  std::vector<std::size_t> free_rows;
};

struct GaussianMixture {
  Matrix means;  // classes x d
  double variance = 1.0;
  std::vector<std::size_t> category_of;
  std::vector<double> class_prior;
};

using TrueModel = std::variant<BigramTable, GaussianMixture>;

std::size_t true_model_classes(const TrueModel& tm);
/// log p_tm(y | x) for a dataset example.
double true_log_prob(const TrueModel& tm, std::span<const double> input, std::size_t label);
std::vector<double> stationary_distribution(const Matrix& rows);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// E(Y|X) in nats. Exact for bigram tables; Monte-Carlo for mixtures (samples drawn from rng).
Estimate true_conditional_entropy(const TrueModel& tm, RngStream* rng = nullptr, std::size_t samples = 20000);
/// Sum over free rows of KL(row || uniform(V)).
double oracle_model_info(const TrueModel& tm);
/// Monte-Carlo Bayes error of the optimal classifier; labels optionally collapsed by `label_map`.
Estimate bayes_error(const GaussianMixture& gm, RngStream& rng, std::size_t samples,
                     std::span<const std::size_t> label_map = {});

struct GeneratedData {
  LabeledDataset data;
  TrueModel truth;
};

GeneratedData gen_bigram_corpus(std::size_t vocab, std::size_t free_rows, std::size_t n, double alpha,
                                RngStream rng);

struct HierGeometry {
  double between = 4.0;  // category mean norm
  double within = 2.0;   // class offset norm
  double variance = 1.0;
};

GeneratedData gen_hier_classification(std::span<const std::size_t> classes_per_category, std::size_t input_dim,
                                      HierGeometry geometry, std::size_t n, RngStream rng);
GeneratedData gen_hier_classification(std::size_t categories, std::size_t classes_per_category,
                                      std::size_t input_dim, HierGeometry geometry, std::size_t n, RngStream rng);

/// n fresh examples from a mixture, classes drawn uniformly from `classes`
/// (all classes when empty). Labels keep the mixture's class ids.
LabeledDataset sample_mixture(const GaussianMixture& gm, std::size_t n, RngStream rng,
                              std::span<const std::size_t> classes = {});

LabeledDataset permute_labels(const LabeledDataset& data, RngStream rng);
LabeledDataset apply_label_permutation(const LabeledDataset& data, std::span<const std::size_t> perm);
LabeledDataset randomize_labels(const LabeledDataset& data, RngStream rng);

struct TaskSpec {
  std::string name;
  std::vector<std::size_t> filter;  // kept source labels
  std::vector<std::size_t> remap;   // remap[i] is the new label of filter[i]

  std::size_t num_classes() const;
  void validate() const;
};

/// Task keeping `labels` with new ids 0..|labels|-1.
TaskSpec make_filter_task(std::string name, std::vector<std::size_t> labels);
/// Task relabelling every class of a mixture by its category.
TaskSpec make_category_task(std::string name, const GaussianMixture& gm);

LabeledDataset subtask(const LabeledDataset& data, const TaskSpec& spec);
/// Single task equivalent to applying `first` then `second`.
TaskSpec compose(const TaskSpec& first, const TaskSpec& second);

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

void write_jsonl(const LabeledDataset& data, std::ostream& out);
LabeledDataset read_jsonl(std::istream& in, std::size_t num_classes, InputKind kind);

nlohmann::json true_model_to_json(const TrueModel& tm);

}  // namespace preqinfo
