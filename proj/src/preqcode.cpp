#include "preqinfo/preqcode.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "preqinfo/error.hpp"
#include "preqinfo/jobs.hpp"

namespace preqinfo {

bool PartitionSchedule::is_boundary(std::size_t t) const {
  return std::binary_search(boundaries.begin(), boundaries.end(), t);
}

PartitionSchedule make_schedule(std::size_t n, std::size_t first, double growth) {
  PREQINFO_CHECK(first >= 1 && first <= n, InvalidArgument,
                 "schedule needs 1 <= t_1 <= n (t_1=" + std::to_string(first) + ", n=" + std::to_string(n) + ")");
  PREQINFO_CHECK(growth > 1.0 && std::isfinite(growth), InvalidArgument, "schedule growth factor must be > 1");
  PartitionSchedule s;
  s.growth = growth;
  s.first = first;
  s.boundaries = {0};
  std::size_t size = first, t = 0;
  while (t < n) {
    t = std::min(n, t + size);
    s.boundaries.push_back(t);
    size = std::max<std::size_t>(size + 1, static_cast<std::size_t>(std::llround(growth * static_cast<double>(size))));
  }
  return s;
}

PartitionSchedule make_schedule(std::size_t n, std::size_t first, double growth, std::span<const std::size_t> extra) {
  auto s = make_schedule(n, first, growth);
  for (auto t : extra) {
    if (t > 0 && t < n) s.boundaries.push_back(t);
  }
  std::sort(s.boundaries.begin(), s.boundaries.end());
  s.boundaries.erase(std::unique(s.boundaries.begin(), s.boundaries.end()), s.boundaries.end());
  return s;
}

std::string to_string(FirstSegmentMode m) { return m == FirstSegmentMode::Uniform ? "uniform" : "model"; }

FirstSegmentMode parse_first_segment_mode(const std::string& s) {
  if (s == "uniform") return FirstSegmentMode::Uniform;
  if (s == "model") return FirstSegmentMode::Model;
  throw InvalidArgument("unknown first segment mode: " + s);
}

void PreqConfig::validate() const {
  PREQINFO_CHECK(first_segment >= 1, InvalidArgument, "first segment size must be >= 1");
  PREQINFO_CHECK(growth > 1.0 && std::isfinite(growth), InvalidArgument, "growth factor must be > 1");
  train.validate();
}

double CodingCurve::total() const {
  double s = 0.0;
  for (const auto& r : records) s += r.codelength;
  return s;
}

std::size_t CodingCurve::clamps() const {
  std::size_t c = 0;
  for (const auto& r : records) c += r.clamps;
  return c;
}

const ModelState& CodingCurve::model_at(std::size_t t) const {
  if (t == schedule.n() && final_model) return *final_model;
  PREQINFO_CHECK(t > 0 && t < schedule.n() && schedule.is_boundary(t), InvalidArgument,
                 "no model trained on a prefix of " + std::to_string(t) + " examples");
  const auto s = static_cast<std::size_t>(
      std::lower_bound(schedule.boundaries.begin(), schedule.boundaries.end(), t) - schedule.boundaries.begin());
  return models.at(s);
}

nlohmann::json CodingCurve::to_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (std::size_t s = 0; s < records.size(); ++s) {
    const auto& r = records[s];
    segs.push_back({{"segment", s},
                    {"t_start", r.t_start},
                    {"t_end", r.t_end},
                    {"codelength_nats", r.codelength},
                    {"mean_nats", r.mean},
                    {"heldout_nll", std::isnan(r.heldout_nll) ? nlohmann::json(nullptr) : nlohmann::json(r.heldout_nll)},
                    {"heldout_size", r.heldout_size},
                    {"clamps", r.clamps},
                    {"checkpoint_id", r.checkpoint_id}});
  }
  std::ostringstream fp;
  fp << std::hex << std::setw(16) << std::setfill('0') << data_fingerprint;
  return {{"total_nats", total()},
          {"total_knats", total() / 1000.0},
          {"n", schedule.n()},
          {"num_classes", num_classes},
          {"first_segment", schedule.first},
          {"growth", schedule.growth},
          {"boundaries", schedule.boundaries},
          {"first_segment_mode", to_string(first_segment_mode)},
          {"warm_start", warm_start},
          {"initial_model_id", initial_model_id},
          {"data_fingerprint", fp.str()},
          {"seed", seed},
          {"stream", stream},
          {"clamps", clamps()},
          {"segments", segs}};
}

namespace {

// Early-stopping examples for the prefix [0, t): the h(t) lowest-ranked indices
// under one fixed random ranking, so consecutive prefixes mostly agree.
std::vector<std::size_t> prefix_heldout(const std::vector<std::size_t>& rank_order, std::size_t t,
                                        const TrainConfig& cfg) {
  const std::size_t h = cfg.heldout_size(t);
  std::vector<std::size_t> out;
  out.reserve(h);
  for (auto i : rank_order) {
    if (out.size() == h) break;
    if (i < t) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

CodingCurve code_with_schedule(const ModelState& theta0, const LabeledDataset& data, std::size_t offset,
                               const PreqConfig& cfg, PartitionSchedule schedule) {
  cfg.validate();
  check_compatible(theta0, data);
  const std::size_t n = schedule.n();
  PREQINFO_CHECK(n >= 1, InvalidArgument, "prequential coding needs at least one example");
  PREQINFO_CHECK(offset + n <= data.size(), InvalidArgument, "coded range exceeds the dataset");

  CodingCurve curve;
  curve.schedule = std::move(schedule);
  curve.first_segment_mode = cfg.first_segment_mode.value_or(theta0.trained() ? FirstSegmentMode::Model
                                                                              : FirstSegmentMode::Uniform);
  curve.warm_start = cfg.warm_start;
  curve.initial_model_id = theta0.checkpoint_id();
  curve.data_fingerprint = data.fingerprint();
  curve.num_classes = data.num_classes;
  curve.offset = offset;
  curve.seed = cfg.seed;
  curve.stream = cfg.stream;

  const std::size_t S = curve.schedule.segments();
  const RngStream root(cfg.seed, {cfg.stream});
  const auto rank_order = root.child("heldout-rank").permutation(offset + n);
  curve.models.resize(S);
  curve.models[0] = theta0;
  curve.records.resize(S);
  std::vector<std::size_t> held_sizes(S, 0);
  std::vector<double> held_nll(S, std::numeric_limits<double>::quiet_NaN());

  auto train_segment = [&](std::size_t s, const ModelState& init) {
    const std::size_t t = offset + curve.schedule.begin(s);
    TrainConfig tc = cfg.train;
    tc.shuffle_seed = root.child("segment").child(s).key();
    const auto prefix = data.slice(0, t);
    const auto heldout = prefix_heldout(rank_order, t, tc);
    auto out = fit(init, prefix, tc, "segment " + std::to_string(s), heldout);
    held_sizes[s] = out.heldout_size;
    held_nll[s] = out.best_heldout_nll;
    curve.models[s] = std::move(out.model);
  };

  if (cfg.warm_start) {
    for (std::size_t s = 1; s < S; ++s) train_segment(s, curve.models[s - 1]);
  } else {
    parallel_for(S > 0 ? S - 1 : 0, [&](std::size_t i) { train_segment(i + 1, theta0); }, cfg.jobs);
  }

  curve.example_costs.assign(n, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    auto& r = curve.records[s];
    r.t_start = curve.schedule.begin(s);
    r.t_end = curve.schedule.end(s);
    r.heldout_nll = held_nll[s];
    r.heldout_size = held_sizes[s];
    r.checkpoint_id = curve.models[s].checkpoint_id();
    if (s == 0 && curve.first_segment_mode == FirstSegmentMode::Uniform) {
      const double lnk = std::log(static_cast<double>(data.num_classes));
      std::fill(curve.example_costs.begin(), curve.example_costs.begin() + static_cast<std::ptrdiff_t>(r.t_end), lnk);
      r.codelength = static_cast<double>(r.t_end) * lnk;
    } else {
      auto costs = example_costs(curve.models[s], data, offset + r.t_start, offset + r.t_end, &r.clamps);
      std::copy(costs.begin(), costs.end(), curve.example_costs.begin() + static_cast<std::ptrdiff_t>(r.t_start));
      for (double c : costs) r.codelength += c;
    }
    r.mean = r.codelength / static_cast<double>(r.t_end - r.t_start);
  }

  if (cfg.train_final) {
    TrainConfig tc = cfg.train;
    tc.shuffle_seed = root.child("final").key();
    const auto heldout = prefix_heldout(rank_order, offset + n, tc);
    curve.final_model =
        fit(cfg.warm_start ? curve.models.back() : theta0, data.slice(0, offset + n), tc, "final", heldout).model;
  }
  return curve;
}

}  // namespace

CodingCurve preq_code(const ModelState& theta0, const LabeledDataset& data, const PreqConfig& cfg) {
  PREQINFO_CHECK(!data.empty(), InvalidArgument, "prequential coding needs at least one example");
  cfg.validate();
  const std::size_t first = std::min(cfg.first_segment, data.size());
  return code_with_schedule(theta0, data, 0, cfg, make_schedule(data.size(), first, cfg.growth, cfg.extra_boundaries));
}

CodingCurve preq_code(const ModelState& theta0, const LabeledDataset& data, std::size_t begin, std::size_t end,
                      const PreqConfig& cfg) {
  PREQINFO_CHECK(begin < end && end <= data.size(), InvalidArgument, "prequential coding range is empty or out of bounds");
  cfg.validate();
  const std::size_t first = std::min(cfg.first_segment, end - begin);
  return code_with_schedule(theta0, data, begin, cfg, make_schedule(end - begin, first, cfg.growth, cfg.extra_boundaries));
}

CodingCurve preq_exact(const ModelState& theta0, const LabeledDataset& data, const PreqConfig& cfg) {
  PREQINFO_CHECK(!data.empty(), InvalidArgument, "prequential coding needs at least one example");
  PREQINFO_CHECK(data.size() <= kPreqExactLimit, InvalidArgument,
                 "preq_exact is limited to " + std::to_string(kPreqExactLimit) + " examples (got " +
                     std::to_string(data.size()) + ")");
  PartitionSchedule s;
  s.first = 1;
  s.growth = 1.0;
  s.boundaries.resize(data.size() + 1);
  for (std::size_t i = 0; i <= data.size(); ++i) s.boundaries[i] = i;
  return code_with_schedule(theta0, data, 0, cfg, std::move(s));
}

double curve_prefix(const CodingCurve& curve, std::size_t t) {
  PREQINFO_CHECK(curve.schedule.is_boundary(t), InvalidArgument,
                 std::to_string(t) + " is not a boundary of the coding schedule");
  double s = 0.0;
  for (const auto& r : curve.records) {
    if (r.t_end <= t) s += r.codelength;
  }
  return s;
}

double curve_suffix(const CodingCurve& curve, std::size_t t) {
  PREQINFO_CHECK(curve.schedule.is_boundary(t), InvalidArgument,
                 std::to_string(t) + " is not a boundary of the coding schedule");
  double s = 0.0;
  for (const auto& r : curve.records) {
    if (r.t_start >= t) s += r.codelength;
  }
  return s;
}

void write_curve_csv(const CodingCurve& curve, std::ostream& out) {
  out << "segment,t_start,t_end,codelength_nats,mean_nats,heldout_nll,clamps\n";
  out << std::setprecision(17);
  for (std::size_t s = 0; s < curve.records.size(); ++s) {
    const auto& r = curve.records[s];
    out << s << ',' << r.t_start << ',' << r.t_end << ',' << r.codelength << ',' << r.mean << ',';
    if (std::isnan(r.heldout_nll)) {
      out << "nan";
    } else {
      out << r.heldout_nll;
    }
    out << ',' << r.clamps << '\n';
  }
}

std::vector<CurveRow> read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(ParseError::Kind::Truncated, "empty curve CSV");
  if (line.rfind("segment,t_start,t_end,codelength_nats", 0) != 0) {
    throw ParseError(ParseError::Kind::BadMagic, "curve CSV header not recognised");
  }
  std::vector<CurveRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 7) {
      throw ParseError(ParseError::Kind::BadValue, "curve CSV line " + std::to_string(lineno) + ": expected 7 fields");
    }
    try {
      CurveRow r;
      std::size_t pos = 0;
      auto whole = [&](const std::string& c, auto v) {
        if (pos != c.size()) throw std::invalid_argument(c);
        return v;
      };
      r.segment = whole(cells[0], std::stoull(cells[0], &pos));
      r.t_start = whole(cells[1], std::stoull(cells[1], &pos));
      r.t_end = whole(cells[2], std::stoull(cells[2], &pos));
      r.codelength = whole(cells[3], std::stod(cells[3], &pos));
      r.mean = whole(cells[4], std::stod(cells[4], &pos));
      r.heldout_nll = whole(cells[5], std::stod(cells[5], &pos));
      r.clamps = whole(cells[6], std::stoull(cells[6], &pos));
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError(ParseError::Kind::BadValue, "curve CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace preqinfo
