#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preqinfo/datakit.hpp"
#include "preqinfo/models.hpp"
#include "preqinfo/preqcode.hpp"
#include "preqinfo/stats.hpp"

namespace preqinfo {

/// Named task datasets. Registration order gives each task its head id.
/// A task may hold one dataset per chain position; position p uses pool p
/// (the last pool when there are fewer), so a chain revisiting a task sees fresh examples.
class TaskRegistry {
 public:
  void add(const std::string& name, LabeledDataset data);
  void add(const std::string& name, std::vector<LabeledDataset> pools);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const LabeledDataset& get(const std::string& name, std::size_t position = 0) const;
  std::uint32_t id(const std::string& name) const;
  std::vector<std::string> names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<LabeledDataset>> pools_;
  std::map<std::string, std::uint32_t> index_;
};

/// Hierarchical suite built from one mixture: T_V (first category's classes),
/// T_A (second category's), T_VA (category labels) and T_full (every class) are
/// views of a shared pool of pool_size examples, so each task's size follows its
/// share of the classes. One independent pool per chain position (3).
/// With blobs_per_class > 1, consecutive mixture components of a category form one class.
TaskRegistry hierarchical_suite(const GaussianMixture& gm, std::size_t pool_size, RngStream rng,
                                std::size_t blobs_per_class = 1);

/// A transfer chain such as T_V -> T_A -> T_V.
struct ChainSpec {
  std::vector<std::string> tasks;

  static ChainSpec parse(const std::string& text);  // "T_V->T_A"
  std::string name() const;
  ChainSpec prefix(std::size_t length) const;
  void validate(const TaskRegistry& registry) const;

  bool operator==(const ChainSpec&) const = default;
};

struct DissectionConfig {
  ModelSpec spec;  // outputs follow the first task of each chain
  PreqConfig preq{};
  // each hop trains on the first round(train_fraction * |T|) examples and codes the rest
  double train_fraction = 2.0 / 3.0;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double tolerance = 0.2;

  void validate() const;
};

/// Outcome of the last hop of a chain prefix.
struct ChainHop {
  ModelState model;  // trained on the hop's task
  double lit = 0.0;  // L_IT of the hop, nats
};

/// Hops keyed by (prefix, seed); identical keys hold identical values.
class ChainCache {
 public:
  std::optional<ChainHop> find(const std::string& key) const;
  void store(const std::string& key, const ChainHop& hop);
  std::size_t size() const;
  std::size_t hits() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, ChainHop> hops_;
  mutable std::size_t hits_ = 0;
};

/// L_IT of the chain's final hop (nats), measured with the model left by the
/// earlier hops as theta_0.
double run_chain(const ChainSpec& chain, const TaskRegistry& registry, const DissectionConfig& cfg,
                 std::uint64_t seed, ChainCache& cache);

/// Model left after training along the whole chain.
ModelState chain_model(const ChainSpec& chain, const TaskRegistry& registry, const DissectionConfig& cfg,
                       std::uint64_t seed, ChainCache& cache);

/// (n, k) used for a task of the given size.
std::pair<std::size_t, std::size_t> hop_split(const DissectionConfig& cfg, std::size_t task_size);

/// The fifteen chains needed by the identities, Venn decomposition and forgetting.
std::vector<ChainSpec> dissection_chains();

struct IdentityResidual {
  int id = 0;
  std::string expression;
  double lhs = 0.0;
  double rhs = 0.0;
  std::optional<double> residual;  // empty when rhs is (numerically) zero
  bool within_tolerance = false;
};

struct VennComponents {
  double shared = 0.0;      // max(0, L(A) - L(V->A))
  double shared_alt = 0.0;  // max(0, L(V) - L(A->V))
  double shared_gap = 0.0;  // |shared - shared_alt| / max(shared, shared_alt), 0 when both are 0
  double specific_v = 0.0;
  double specific_a = 0.0;
  double category = 0.0;  // L(VA)
  std::vector<std::string> clipped;
};

struct DissectionReport {
  std::map<std::string, Summary> chains;  // chain name -> L_IT over seeds (nats)
  std::vector<IdentityResidual> identities;
  std::optional<VennComponents> venn;
  double tolerance = 0.2;
  double train_fraction = 0.0;
  std::vector<std::uint64_t> seeds;

  double value(const std::string& chain) const;  // median; MissingOperand when absent
  nlohmann::json to_json() const;
};

DissectionReport run_dissection(const TaskRegistry& registry, std::span<const ChainSpec> chains,
                                const DissectionConfig& cfg, ChainCache& cache);

/// |lhs - rhs| / |rhs| for the seven staged-learning identities, on chain medians.
std::vector<IdentityResidual> check_identities(const DissectionReport& report, double tolerance = 0.2);
/// The same from raw values (used for documentation checks).
std::vector<IdentityResidual> check_identities(const std::map<std::string, double>& values, double tolerance = 0.2);

VennComponents venn_decompose(const DissectionReport& report);
VennComponents venn_decompose(const std::map<std::string, double>& values);

/// F = L(T -> T' -> T).
double forgetting(const DissectionReport& report, const std::string& task, const std::string& other);

}  // namespace preqinfo
