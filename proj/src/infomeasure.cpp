#include "preqinfo/infomeasure.hpp"

#include <algorithm>
#include <cmath>

#include "preqinfo/error.hpp"
#include "preqinfo/jobs.hpp"
#include "preqinfo/stats.hpp"

namespace preqinfo {

nlohmann::json InfoReport::to_json() const {
  return {{"measure", measure},
          {"ref_nats", ref},
          {"model_nats", model},
          {"value_nats", value},
          {"value_knats", value_knats},
          {"n", n},
          {"k", k},
          {"seed", seed},
          {"ref_curve_id", ref_curve_id},
          {"model_curve_id", model_curve_id}};
}

InfoReport make_report(std::string measure, double ref, double model, std::size_t n, std::size_t k,
                       std::uint64_t seed) {
  InfoReport r;
  r.measure = std::move(measure);
  r.ref = ref;
  r.model = model;
  r.value = ref - model;
  r.value_knats = r.value / 1000.0;
  r.n = n;
  r.k = k;
  r.seed = seed;
  return r;
}

std::size_t default_k(std::size_t dataset_size) { return std::min<std::size_t>(5000, dataset_size / 3); }

namespace {

std::string curve_id(const CodingCurve& c) {
  return c.stream + ":" + c.initial_model_id + ":" + std::to_string(c.schedule.n());
}

PreqConfig ref_config(const PreqConfig& cfg, std::vector<std::size_t> extra, bool train_final) {
  PreqConfig c = cfg;
  c.stream = cfg.stream + "/ref";
  c.extra_boundaries = std::move(extra);
  c.train_final = train_final;
  return c;
}

PreqConfig model_config(const PreqConfig& cfg) {
  PreqConfig c = cfg;
  c.stream = cfg.stream + "/model";
  c.first_segment_mode = FirstSegmentMode::Model;
  c.extra_boundaries.clear();
  c.train_final = false;
  return c;
}

TransferRun finish_transfer(const CodingCurve& ref_curve, const ModelState& theta_n, const LabeledDataset& data,
                            std::size_t n, std::size_t k, const PreqConfig& cfg) {
  TransferRun run;
  run.ref_curve = ref_curve;
  run.theta_n = theta_n;
  const double ref = curve_prefix(ref_curve, k);
  double model = ref;
  if (n == 0) {
    run.model_curve = ref_curve;
  } else {
    run.model_curve = preq_code(theta_n, data, n, n + k, model_config(cfg));
    model = run.model_curve.total();
  }
  run.report = make_report("L_IT", ref, model, n, k, cfg.seed);
  run.report.ref_curve_id = curve_id(run.ref_curve);
  run.report.model_curve_id = curve_id(run.model_curve);
  return run;
}

}  // namespace

TransferRun information_transfer_run(const ModelState& theta0, const LabeledDataset& data, std::size_t n,
                                     std::size_t k, const PreqConfig& cfg) {
  PREQINFO_CHECK(k >= 1, InvalidArgument, "L_IT needs k >= 1");
  PREQINFO_CHECK(n + k <= data.size(), InvalidArgument,
                 "L_IT needs n + k <= |data| (n=" + std::to_string(n) + ", k=" + std::to_string(k) +
                     ", |data|=" + std::to_string(data.size()) + ")");
  const std::size_t span = std::max(n, k);
  auto ref_curve = preq_code(theta0, data.slice(0, span), ref_config(cfg, {n, k}, n == span && n > 0));
  const ModelState& theta_n = n == 0 ? theta0 : ref_curve.model_at(n);
  return finish_transfer(ref_curve, theta_n, data, n, k, cfg);
}

InfoReport information_transfer(const ModelState& theta0, const LabeledDataset& data, std::size_t n, std::size_t k,
                                const PreqConfig& cfg) {
  return information_transfer_run(theta0, data, n, k, cfg).report;
}

InfoReport information_advantage(const ModelState& theta, const ModelState& theta_ref, const LabeledDataset& data,
                                 std::size_t k, const PreqConfig& cfg) {
  PREQINFO_CHECK(k >= 1 && k <= data.size(), InvalidArgument, "L_IA needs 1 <= k <= |data|");
  PREQINFO_CHECK(theta.spec.outputs == theta_ref.spec.outputs && theta.spec.outputs == data.num_classes,
                 IncompatibleError, "L_IA needs the same label space for both models and the data");
  PreqConfig c = cfg;
  c.first_segment_mode = FirstSegmentMode::Model;
  c.extra_boundaries.clear();
  c.train_final = false;
  c.stream = cfg.stream + "/lia";
  const auto stream = data.slice(0, k);
  CodingCurve curves[2];
  const ModelState* models[2] = {&theta_ref, &theta};
  parallel_for(2, [&](std::size_t i) { curves[i] = preq_code(*models[i], stream, c); }, cfg.jobs);
  auto r = make_report("L_IA", curves[0].total(), curves[1].total(), 0, k, cfg.seed);
  r.ref_curve_id = curve_id(curves[0]);
  r.model_curve_id = curve_id(curves[1]);
  return r;
}

Estimate lit_one(const ModelState& theta0, const ModelState& theta_n, const LabeledDataset& eval) {
  PREQINFO_CHECK(!eval.empty(), InvalidArgument, "lit_one needs a non-empty evaluation set");
  const auto c0 = example_costs(theta0, eval, 0, eval.size());
  const auto cn = example_costs(theta_n, eval, 0, eval.size());
  std::vector<double> d(c0.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = c0[i] - cn[i];
  return {mean(d), standard_error(d)};
}

double lit_infty_oracle(const CodingCurve& theta0_curve, const LabeledDataset& data, std::size_t n,
                        const std::optional<TrueModel>& tm) {
  PREQINFO_CHECK(tm.has_value(), MissingOperand, "lit_infty_oracle needs the true generating model");
  PREQINFO_CHECK(n <= theta0_curve.example_costs.size() && n <= data.size(), InvalidArgument,
                 "lit_infty_oracle: n exceeds the coded stream");
  double s = 0.0;
  const std::size_t off = theta0_curve.offset;
  PREQINFO_CHECK(off + n <= data.size(), InvalidArgument, "lit_infty_oracle: n exceeds the dataset");
  for (std::size_t i = 0; i < n; ++i) {
    s += theta0_curve.example_costs[i] + true_log_prob(*tm, data.input(off + i), data.labels[off + i]);
  }
  return s;
}

double model_info_hat(double l_preq, std::size_t n, double conditional_entropy) {
  return l_preq - static_cast<double>(n) * conditional_entropy;
}

double model_info_hat(double l_preq, std::size_t n, const TrueModel& tm, RngStream* rng) {
  return model_info_hat(l_preq, n, true_conditional_entropy(tm, rng).value);
}

nlohmann::json BoundReport::to_json() const {
  return {{"lit_one_nats", lit_one.value},
          {"lit_one_stderr", lit_one.std_error},
          {"lit_k_nats", lit_k},
          {"lit_infty_oracle_nats", lit_infty_oracle},
          {"model_info_hat_nats", model_info_hat}};
}

BoundReport bound_report(const TransferRun& run, const LabeledDataset& data, const TrueModel& tm, RngStream* rng) {
  const std::size_t n = run.report.n, k = run.report.k;
  BoundReport b;
  b.lit_one = lit_one(run.ref_curve.models.front(), run.theta_n, data.slice(n, n + k));
  b.lit_k = run.report.value;
  b.lit_infty_oracle = lit_infty_oracle(run.ref_curve, data, n, tm);
  b.model_info_hat = model_info_hat(curve_prefix(run.ref_curve, n), n, tm, rng);
  return b;
}

std::vector<SweepPoint> lit_sweep(const ModelState& theta0, const LabeledDataset& data,
                                  std::span<const std::size_t> n_grid, std::size_t k, const PreqConfig& cfg) {
  PREQINFO_CHECK(!n_grid.empty(), InvalidArgument, "lit_sweep needs a non-empty grid");
  PREQINFO_CHECK(k >= 1, InvalidArgument, "lit_sweep needs k >= 1");
  const std::size_t n_max = *std::max_element(n_grid.begin(), n_grid.end());
  PREQINFO_CHECK(n_max + k <= data.size(), InvalidArgument, "lit_sweep needs max(n_grid) + k <= |data|");
  const std::size_t span = std::max(n_max, k);
  std::vector<std::size_t> extra(n_grid.begin(), n_grid.end());
  extra.push_back(k);
  const auto ref_curve = preq_code(theta0, data.slice(0, span), ref_config(cfg, extra, n_max == span && n_max > 0));

  std::vector<SweepPoint> out(n_grid.size());
  parallel_for(
      n_grid.size(),
      [&](std::size_t i) {
        const std::size_t n = n_grid[i];
        const ModelState& theta_n = n == 0 ? theta0 : ref_curve.model_at(n);
        PreqConfig c = cfg;
        c.stream = cfg.stream + "/n" + std::to_string(n);
        auto run = finish_transfer(ref_curve, theta_n, data, n, k, c);
        out[i] = {n, run.report};
      },
      cfg.jobs);
  return out;
}

SlopeReport log_slope(std::span<const SweepPoint> sweep, std::size_t param_count) {
  std::vector<double> x, y;
  for (const auto& p : sweep) {
    if (p.n == 0) continue;
    x.push_back(std::log(static_cast<double>(p.n)));
    y.push_back(p.report.value);
  }
  SlopeReport r;
  r.slope = fit_line(x, y).slope;
  r.half_dimension = 0.5 * static_cast<double>(param_count);
  return r;
}

}  // namespace preqinfo
