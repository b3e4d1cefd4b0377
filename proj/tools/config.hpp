#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preqinfo/continual.hpp"
#include "preqinfo/datakit.hpp"
#include "preqinfo/models.hpp"
#include "preqinfo/preqcode.hpp"

namespace preqinfo::cli {

/// Schema violation; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A JSON object whose keys are checked against an allowed set on construction.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path, std::set<std::string> allowed);

  bool has(const std::string& key) const { return j_.contains(key); }
  const nlohmann::json& raw(const std::string& key) const;
  Section sub(const std::string& key, std::set<std::string> allowed) const;
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? convert<T>(key) : fallback;
  }
  template <typename T>
  T req(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing required key '" + where(key) + "'");
    return convert<T>(key);
  }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("key '" + where(key) + "' has the wrong type");
    }
  }

  const nlohmann::json& j_;
  std::string path_;
};

inline const std::vector<std::string> kKinds{"gen-data", "preq", "lit",       "lia",        "sweep",
                                             "dissect",  "continual", "acceptance", "plot"};

/// Generated or loaded data. `truth` is set for synthetic generators.
struct DataBundle {
  LabeledDataset data;
  std::optional<TrueModel> truth;
};

DataBundle load_data(const Section& s, std::uint64_t seed, const std::filesystem::path& base);
ModelSpec model_spec(const Section& s, const LabeledDataset& data);
ModelState initial_model(const Section& s, const LabeledDataset& data, std::uint64_t seed,
                         const std::filesystem::path& base);
TrainConfig train_config(const Section& s);
PreqConfig preq_config(const Section& s, std::uint64_t seed);
MethodSpec method_spec(const Section& s);

inline const std::set<std::string> kDataKeys{"type",  "vocab",  "free_rows",   "n",       "alpha",
                                             "classes_per_category", "input_dim", "between", "within",
                                             "variance", "path", "num_classes", "input", "images", "labels",
                                             "randomize_labels", "permute_labels"};
inline const std::set<std::string> kModelKeys{"type", "hidden", "embed_dim", "checkpoint"};
inline const std::set<std::string> kTrainKeys{"optimizer",  "learning_rate",    "momentum",   "batch_size",
                                              "max_epochs", "patience",         "heldout_fraction", "min_heldout"};
inline const std::set<std::string> kPreqKeys{"first_segment", "growth", "warm_start", "first_segment_mode", "train"};
inline const std::set<std::string> kMethodKeys{"method", "c",        "fisher_samples", "merge",
                                               "transfer", "alphas", "head"};

}  // namespace preqinfo::cli
