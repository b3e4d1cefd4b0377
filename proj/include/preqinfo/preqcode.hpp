#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preqinfo/datakit.hpp"
#include "preqinfo/models.hpp"

namespace preqinfo {

/// Boundaries 0 = t_0 < t_1 < ... < t_S = n; segment s covers [t_s, t_{s+1}).
struct PartitionSchedule {
  std::vector<std::size_t> boundaries;
  double growth = 1.5;
  std::size_t first = 8;

  std::size_t n() const { return boundaries.empty() ? 0 : boundaries.back(); }
  std::size_t segments() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
  std::size_t begin(std::size_t s) const { return boundaries[s]; }
  std::size_t end(std::size_t s) const { return boundaries[s + 1]; }
  std::size_t size(std::size_t s) const { return end(s) - begin(s); }
  bool is_boundary(std::size_t t) const;
};

PartitionSchedule make_schedule(std::size_t n, std::size_t first, double growth);
/// Geometric schedule with extra boundaries inserted (values outside (0, n) ignored).
PartitionSchedule make_schedule(std::size_t n, std::size_t first, double growth, std::span<const std::size_t> extra);

enum class FirstSegmentMode { Uniform, Model };

std::string to_string(FirstSegmentMode m);
FirstSegmentMode parse_first_segment_mode(const std::string& s);

struct PreqConfig {
  std::size_t first_segment = 8;
  double growth = 1.5;
  TrainConfig train{};
  bool warm_start = true;
  // unset: uniform for an untrained initial model, model otherwise
  std::optional<FirstSegmentMode> first_segment_mode;
  std::uint64_t seed = 0;
  // stream label that keeps independent coding runs on distinct segment seeds
  std::string stream = "preq";
  // boundaries the schedule must contain
  std::vector<std::size_t> extra_boundaries;
  // also train on the whole stream and keep the result as CodingCurve::final_model
  bool train_final = false;
  std::size_t jobs = 0;

  void validate() const;
};

struct SegmentRecord {
  std::size_t t_start = 0;
  std::size_t t_end = 0;
  double codelength = 0.0;   // nats
  double mean = 0.0;         // nats per example
  double heldout_nll = 0.0;  // NaN when the coding model was not trained here
  std::size_t heldout_size = 0;
  std::size_t clamps = 0;
  std::string checkpoint_id;
};

struct CodingCurve {
  PartitionSchedule schedule;
  std::vector<SegmentRecord> records;
  std::vector<double> example_costs;  // per example, nats
  FirstSegmentMode first_segment_mode = FirstSegmentMode::Uniform;
  bool warm_start = true;
  std::string initial_model_id;
  std::uint64_t data_fingerprint = 0;
  std::size_t num_classes = 0;
  // index in the dataset of the first coded example; segment models also saw [0, offset)
  std::size_t offset = 0;
  std::uint64_t seed = 0;
  std::string stream;
  // models[s] coded segment s; models[0] is the initial model
  std::vector<ModelState> models;
  std::optional<ModelState> final_model;

  double total() const;
  std::size_t clamps() const;
  /// Model trained on the first t examples; t must be a boundary in (0, n).
  const ModelState& model_at(std::size_t t) const;
  nlohmann::json to_json() const;
};

CodingCurve preq_code(const ModelState& theta0, const LabeledDataset& data, const PreqConfig& cfg);
/// Codes examples [begin, end) of data starting from theta0; segment models
/// train on every example before the segment, including the first `begin`.
CodingCurve preq_code(const ModelState& theta0, const LabeledDataset& data, std::size_t begin, std::size_t end,
                      const PreqConfig& cfg);

inline constexpr std::size_t kPreqExactLimit = 256;

/// Retrains after every example (unit segments); n is limited to kPreqExactLimit.
CodingCurve preq_exact(const ModelState& theta0, const LabeledDataset& data, const PreqConfig& cfg);

/// Cumulative codelength of the first t examples; t must be a boundary.
double curve_prefix(const CodingCurve& curve, std::size_t t);
/// Codelength of examples [t, n) from the stored records; t must be a boundary.
double curve_suffix(const CodingCurve& curve, std::size_t t);

void write_curve_csv(const CodingCurve& curve, std::ostream& out);

struct CurveRow {
  std::size_t segment = 0;
  std::size_t t_start = 0;
  std::size_t t_end = 0;
  double codelength = 0.0;
  double mean = 0.0;
  double heldout_nll = 0.0;
  std::size_t clamps = 0;
};

std::vector<CurveRow> read_curve_csv(std::istream& in);

}  // namespace preqinfo
