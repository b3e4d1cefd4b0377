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

/// Difference of two prequential codelengths: value = ref - model.
struct InfoReport {
  std::string measure;  // "L_IT" or "L_IA"
  double ref = 0.0;     // nats
  double model = 0.0;   // nats
  double value = 0.0;   // nats
  double value_knats = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::string ref_curve_id;
  std::string model_curve_id;

  nlohmann::json to_json() const;
};

InfoReport make_report(std::string measure, double ref, double model, std::size_t n, std::size_t k,
                       std::uint64_t seed);

/// Default k: min(5000, floor(size / 3)).
std::size_t default_k(std::size_t dataset_size);

/// Everything produced by one L_IT measurement.
struct TransferRun {
  InfoReport report;
  CodingCurve ref_curve;    // from theta0 over the first max(n, k) examples
  CodingCurve model_curve;  // from theta_n over examples n..n+k
  ModelState theta_n;
};

TransferRun information_transfer_run(const ModelState& theta0, const LabeledDataset& data, std::size_t n,
                                     std::size_t k, const PreqConfig& cfg);
InfoReport information_transfer(const ModelState& theta0, const LabeledDataset& data, std::size_t n, std::size_t k,
                                const PreqConfig& cfg);

/// L_IA of theta over theta_ref on the first k examples; both curves in model mode with shared seeds.
InfoReport information_advantage(const ModelState& theta, const ModelState& theta_ref, const LabeledDataset& data,
                                 std::size_t k, const PreqConfig& cfg);

/// Mean and standard error of -log p_theta0(y|x) + log p_theta_n(y|x) over eval.
Estimate lit_one(const ModelState& theta0, const ModelState& theta_n, const LabeledDataset& eval);

/// Stored per-example costs of the first n coded examples minus their cost under the true model.
double lit_infty_oracle(const CodingCurve& theta0_curve, const LabeledDataset& data, std::size_t n,
                        const std::optional<TrueModel>& tm);

double model_info_hat(double l_preq, std::size_t n, double conditional_entropy);
double model_info_hat(double l_preq, std::size_t n, const TrueModel& tm, RngStream* rng = nullptr);

struct BoundReport {
  Estimate lit_one;  // nats per example
  double lit_k = 0.0;
  double lit_infty_oracle = 0.0;
  double model_info_hat = 0.0;

  nlohmann::json to_json() const;
};

/// Bounds around a finished L_IT run. lit_one is evaluated on examples n..n+k.
BoundReport bound_report(const TransferRun& run, const LabeledDataset& data, const TrueModel& tm,
                         RngStream* rng = nullptr);

struct SweepPoint {
  std::size_t n = 0;
  InfoReport report;
};

/// L_IT at every n of the grid, sharing one coding run from theta0 whose
/// boundaries include every grid point.
std::vector<SweepPoint> lit_sweep(const ModelState& theta0, const LabeledDataset& data,
                                  std::span<const std::size_t> n_grid, std::size_t k, const PreqConfig& cfg);

/// Least-squares slope of L_IT against ln n over the positive grid points, next to d/2.
struct SlopeReport {
  double slope = 0.0;
  double half_dimension = 0.0;
};

SlopeReport log_slope(std::span<const SweepPoint> sweep, std::size_t param_count);

}  // namespace preqinfo
