#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "config.hpp"
#include "preqinfo/acceptance.hpp"
#include "preqinfo/analysis.hpp"
#include "preqinfo/continual.hpp"
#include "preqinfo/error.hpp"
#include "preqinfo/export.hpp"
#include "preqinfo/infomeasure.hpp"
#include "preqinfo/jobs.hpp"
#include "preqinfo/stats.hpp"

namespace preqinfo::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert({"kind", "seed", "description"});
  return keys;
}

const std::map<std::string, std::set<std::string>>& top_level_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"gen-data", with_common({"data"})},
      {"preq", with_common({"data", "model", "preq", "n", "save_model"})},
      {"lit", with_common({"data", "model", "preq", "n", "k"})},
      {"lia", with_common({"data", "model", "preq", "k", "candidate_checkpoint", "pretrain", "pretrain_examples",
                              "reference_checkpoint"})},
      {"sweep", with_common({"data", "model", "preq", "n_grid", "k"})},
      {"dissect", with_common({"suite", "model", "preq", "train_fraction", "tolerance", "seeds", "chains"})},
      {"continual", with_common({"suite", "model", "train", "preq", "methods", "seeds", "retrain_head"})},
      {"acceptance", with_common({"criteria", "seeds"})},
      {"plot", with_common({"curves", "title", "output"})},
  };
  return keys;
}

struct Run {
  std::string kind;
  json config;
  fs::path base;  // relative paths in the config resolve against its directory
  fs::path out;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> seed_override;
  RunManifest manifest;
  Clock::time_point start = Clock::now();
  std::ostream* log = nullptr;

  void emit(const std::string& name, const std::string& content) {
    write_file_atomic(out / name, content);
    manifest.add_file(out, name);
  }
  void time(const std::string& phase, Clock::time_point since) {
    manifest.timings_seconds[phase] = std::chrono::duration<double>(Clock::now() - since).count();
  }
  void finish() {
    time("total", start);
    write_file_atomic(out / "manifest.json", manifest.to_json().dump(2) + "\n");
    *log << "wrote " << manifest.files.size() << " artifacts and manifest.json to " << out.string() << "\n";
  }
};

const json& empty_object() {
  static const json empty = json::object();
  return empty;
}

std::vector<std::uint64_t> seed_list(const Section& s, const Run& r, std::vector<std::uint64_t> fallback) {
  if (r.seed_override) return {*r.seed_override};
  auto seeds = s.get<std::vector<std::uint64_t>>("seeds", std::move(fallback));
  if (seeds.empty()) throw ConfigError("key 'seeds' must not be empty");
  return seeds;
}

std::string csv_num(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

std::string knats(double nats) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f k-nats", nats / 1000.0);
  return buf;
}

std::string curve_to_csv(const CodingCurve& c) {
  std::ostringstream o;
  write_curve_csv(c, o);
  return o.str();
}

void emit_curve(Run& r, const CodingCurve& c, const std::string& stem) {
  r.emit(stem + ".csv", curve_to_csv(c));
  r.emit(stem + ".json", c.to_json().dump(2) + "\n");
}

std::vector<CurveRow> rows_of(const CodingCurve& c) {
  std::istringstream in(curve_to_csv(c));
  return read_curve_csv(in);
}

std::string curve_plot(const std::string& title, const std::vector<std::pair<std::string, const CodingCurve*>>& curves) {
  LinePlot p;
  p.title = title;
  p.x_label = "examples coded (log scale)";
  p.y_label = "codelength per example (nats)";
  for (const auto& [label, c] : curves) p.series.push_back(curve_series(rows_of(*c), label));
  return render_line_svg(p);
}

// ---- subcommands ----------------------------------------------------------

int gen_data(Run& r, const Section& top) {
  auto b = load_data(top.sub("data", kDataKeys), r.seed, r.base);
  std::ostringstream o;
  write_jsonl(b.data, o);
  r.emit("data.jsonl", o.str());
  if (b.truth) r.emit("truth.json", true_model_to_json(*b.truth).dump(2) + "\n");
  *r.log << "generated " << b.data.size() << " examples, K=" << b.data.num_classes << "\n";
  return kExitOk;
}

struct Problem {
  DataBundle bundle;
  ModelState theta0;
  PreqConfig preq;
};

Problem problem(Run& r, const Section& top) {
  Problem p;
  p.bundle = load_data(top.sub("data", kDataKeys), r.seed, r.base);
  p.theta0 = initial_model(top.sub("model", kModelKeys), p.bundle.data, r.seed, r.base);
  p.preq = top.has("preq") ? preq_config(top.sub("preq", kPreqKeys), r.seed) : PreqConfig{};
  p.preq.seed = r.seed;
  p.preq.validate();
  return p;
}

int preq(Run& r, const Section& top) {
  auto p = problem(r, top);
  const std::size_t n = top.get<std::size_t>("n", p.bundle.data.size());
  if (n < 1 || n > p.bundle.data.size()) throw ConfigError("key 'n' must be in [1, |data|]");
  auto cfg = p.preq;
  cfg.train_final = top.get<bool>("save_model", false);
  const auto t0 = Clock::now();
  const auto curve = preq_code(p.theta0, p.bundle.data.slice(0, n), cfg);
  r.time("coding", t0);
  emit_curve(r, curve, "curve");
  r.emit("curve.svg", curve_plot("Prequential coding curve", {{"preq", &curve}}));
  if (curve.final_model) {
    std::ostringstream o;
    write_checkpoint(*curve.final_model, o);
    r.emit("final_model.ckpt", o.str());
  }
  *r.log << "total codelength " << knats(curve.total()) << " over " << n << " examples\n";
  return kExitOk;
}

int lit(Run& r, const Section& top) {
  auto p = problem(r, top);
  const std::size_t size = p.bundle.data.size();
  const std::size_t k = top.get<std::size_t>("k", default_k(size));
  if (k < 1 || k >= size) throw ConfigError("key 'k' must be in [1, |data|)");
  const std::size_t n = top.get<std::size_t>("n", size - k);
  if (n + k > size) throw ConfigError("keys 'n' + 'k' exceed the dataset size");
  const auto t0 = Clock::now();
  const auto run = information_transfer_run(p.theta0, p.bundle.data, n, k, p.preq);
  r.time("coding", t0);
  json report = {{"lit", run.report.to_json()}};
  if (p.bundle.truth) report["bounds"] = bound_report(run, p.bundle.data, *p.bundle.truth).to_json();
  r.emit("lit.json", report.dump(2) + "\n");
  emit_curve(r, run.ref_curve, "ref_curve");
  emit_curve(r, run.model_curve, "model_curve");
  r.emit("curves.svg", curve_plot("L_IT coding curves", {{"theta_0", &run.ref_curve}, {"theta_n", &run.model_curve}}));
  std::ostringstream ck;
  write_checkpoint(run.theta_n, ck);
  r.emit("theta_n.ckpt", ck.str());
  *r.log << "L_IT(n=" << n << ", k=" << k << ") = " << knats(run.report.value) << "\n";
  return kExitOk;
}

int lia(Run& r, const Section& top) {
  auto p = problem(r, top);
  const auto& data = p.bundle.data;
  const std::size_t k = top.get<std::size_t>("k", data.size());
  if (k < 1 || k > data.size()) throw ConfigError("key 'k' must be in [1, |data|]");
  ModelState reference = top.has("reference_checkpoint")
                             ? load_checkpoint(r.base / top.req<std::string>("reference_checkpoint"))
                             : p.theta0;
  ModelState candidate;
  if (top.has("candidate_checkpoint")) {
    candidate = load_checkpoint(r.base / top.req<std::string>("candidate_checkpoint"));
  } else if (top.has("pretrain") || top.has("pretrain_examples")) {
    // pretrain_examples: train on the examples that follow the coded stream
    LabeledDataset pre;
    if (top.has("pretrain")) {
      pre = load_data(top.sub("pretrain", kDataKeys), RngStream(r.seed, {"pretrain"}).key(), r.base).data;
    } else {
      const auto m = top.req<std::size_t>("pretrain_examples");
      if (m < 1 || k + m > data.size()) throw ConfigError("key 'pretrain_examples' must be in [1, |data| - k]");
      pre = data.slice(k, k + m);
    }
    auto tc = p.preq.train;
    tc.shuffle_seed = RngStream(r.seed, {"pretrain", "train"}).key();
    candidate = train(p.theta0, pre, tc);
  } else {
    throw ConfigError("lia needs 'candidate_checkpoint', 'pretrain' or 'pretrain_examples'");
  }
  const auto t0 = Clock::now();
  const auto rep = information_advantage(candidate, reference, data, k, p.preq);
  r.time("coding", t0);
  r.emit("lia.json", rep.to_json().dump(2) + "\n");
  *r.log << "L_IA(k=" << k << ") = " << knats(rep.value) << "\n";
  return kExitOk;
}

int sweep(Run& r, const Section& top) {
  auto p = problem(r, top);
  const auto grid = top.req<std::vector<std::size_t>>("n_grid");
  if (grid.empty()) throw ConfigError("key 'n_grid' must not be empty");
  const std::size_t k = top.req<std::size_t>("k");
  const auto t0 = Clock::now();
  const auto points = lit_sweep(p.theta0, p.bundle.data, grid, k, p.preq);
  r.time("coding", t0);
  std::ostringstream csv;
  csv << "n,lit_nats,lit_knats\n";
  json pts = json::array();
  PlotSeries s;
  s.label = "L_IT(n, k=" + std::to_string(k) + ")";
  for (const auto& pt : points) {
    csv << pt.n << ',' << csv_num(pt.report.value) << ',' << csv_num(pt.report.value_knats) << '\n';
    pts.push_back({{"n", pt.n}, {"report", pt.report.to_json()}});
    if (pt.n > 0) {
      s.x.push_back(static_cast<double>(pt.n));
      s.y.push_back(pt.report.value);
    }
  }
  json out = {{"points", pts}};
  if (std::count_if(grid.begin(), grid.end(), [](std::size_t n) { return n > 0; }) >= 2) {
    const auto slope = log_slope(points, p.theta0.spec.param_count());
    out["slope_nats_per_ln_n"] = slope.slope;
    out["half_dimension"] = slope.half_dimension;
  }
  r.emit("sweep.csv", csv.str());
  r.emit("sweep.json", out.dump(2) + "\n");
  if (!s.x.empty()) {
    LinePlot plot{"L_IT against n", "n (log scale)", "L_IT (nats)", true, {s}};
    r.emit("lit_vs_log_n.svg", render_line_svg(plot));
  }
  for (const auto& pt : points) *r.log << "n=" << pt.n << "  L_IT " << knats(pt.report.value) << "\n";
  return kExitOk;
}

int dissect(Run& r, const Section& top) {
  const auto suite = top.sub("suite", {"classes_per_category", "blobs_per_class", "input_dim", "between", "within",
                                       "variance", "pool_size", "data_seed"});
  HierGeometry geo;
  geo.between = suite.get<double>("between", geo.between);
  geo.within = suite.get<double>("within", geo.within);
  geo.variance = suite.get<double>("variance", geo.variance);
  const auto blobs = suite.get<std::size_t>("blobs_per_class", 4);
  auto classes = suite.get<std::vector<std::size_t>>("classes_per_category", {2, 3});
  if (classes.size() != 2) throw ConfigError("key 'suite.classes_per_category' needs two categories");
  if (blobs < 1) throw ConfigError("key 'suite.blobs_per_class' must be >= 1");
  for (auto& c : classes) c *= blobs;
  const std::size_t dim = suite.get<std::size_t>("input_dim", 16);
  RngStream root(suite.get<std::uint64_t>("data_seed", 1), {"hier"});
  auto gen = gen_hier_classification(classes, dim, geo, 10, root.child("gm"));
  auto registry = hierarchical_suite(std::get<GaussianMixture>(gen.truth), suite.get<std::size_t>("pool_size", 6000),
                                     root.child("tasks"), blobs);

  DissectionConfig cfg;
  const auto model = top.has("model") ? top.sub("model", {"hidden"}) : Section(empty_object(), "model", {});
  cfg.spec = ModelSpec::mlp(dim, model.get<std::size_t>("hidden", 64), 2);
  if (top.has("preq")) cfg.preq = preq_config(top.sub("preq", kPreqKeys), r.seed);
  cfg.train_fraction = top.get<double>("train_fraction", cfg.train_fraction);
  cfg.tolerance = top.get<double>("tolerance", cfg.tolerance);
  cfg.seeds = seed_list(top, r, {1, 2, 3});
  cfg.validate();
  r.manifest.seeds = cfg.seeds;
  std::vector<ChainSpec> chains;
  if (top.has("chains")) {
    for (const auto& c : top.req<std::vector<std::string>>("chains")) chains.push_back(ChainSpec::parse(c));
  } else {
    chains = dissection_chains();
  }
  for (const auto& c : chains) c.validate(registry);

  ChainCache cache;
  const auto t0 = Clock::now();
  const auto report = run_dissection(registry, chains, cfg, cache);
  r.time("chains", t0);
  r.emit("report.json", report.to_json().dump(2) + "\n");
  std::ostringstream csv;
  csv << "chain,median_nats,min_nats,max_nats,median_knats\n";
  for (const auto& [name, s] : report.chains)
    csv << name << ',' << csv_num(s.median) << ',' << csv_num(s.min) << ',' << csv_num(s.max) << ','
        << csv_num(s.median / 1000.0) << '\n';
  r.emit("chains.csv", csv.str());
  if (report.venn) r.emit("venn.svg", render_venn_svg(*report.venn));

  for (const auto& [name, s] : report.chains) *r.log << name << "  " << knats(s.median) << "\n";
  for (const auto& id : report.identities) {
    *r.log << "identity " << id.id << ": " << id.expression << "  lhs " << knats(id.lhs) << ", rhs " << knats(id.rhs)
           << ", residual " << (id.residual ? csv_num(*id.residual) : std::string("n/a")) << "\n";
  }
  return kExitOk;
}

int continual(Run& r, const Section& top) {
  const auto suite = top.sub("suite", {"tasks", "classes_per_task", "blobs_per_class", "input_dim", "between",
                                       "within", "variance", "train_size", "k", "future_train_size"});
  BlobSuiteSpec bs;
  bs.tasks = suite.get<std::size_t>("tasks", bs.tasks);
  bs.classes_per_task = suite.get<std::size_t>("classes_per_task", bs.classes_per_task);
  bs.blobs_per_class = suite.get<std::size_t>("blobs_per_class", bs.blobs_per_class);
  bs.input_dim = suite.get<std::size_t>("input_dim", bs.input_dim);
  bs.geometry.between = suite.get<double>("between", bs.geometry.between);
  bs.geometry.within = suite.get<double>("within", bs.geometry.within);
  bs.geometry.variance = suite.get<double>("variance", bs.geometry.variance);

  ContinualConfig cfg;
  const auto model = top.has("model") ? top.sub("model", {"hidden"}) : Section(empty_object(), "model", {});
  cfg.spec = ModelSpec::mlp(bs.input_dim, model.get<std::size_t>("hidden", 64), bs.classes_per_task);
  cfg.train_size = suite.get<std::size_t>("train_size", 2000);
  cfg.k = suite.get<std::size_t>("k", 2000);
  cfg.future_train_size = suite.get<std::size_t>("future_train_size", cfg.train_size);
  bs.examples_per_task = cfg.train_size + cfg.k;
  if (top.has("train")) cfg.train = train_config(top.sub("train", kTrainKeys));
  if (top.has("preq")) cfg.preq = preq_config(top.sub("preq", kPreqKeys), r.seed);
  cfg.validate();

  std::vector<std::pair<MethodSpec, HeadStrategy>> plan;
  const auto& methods = top.raw("methods");
  if (!methods.is_array() || methods.empty()) throw ConfigError("key 'methods' must be a non-empty array");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    Section m(methods[i], "methods[" + std::to_string(i) + "]", kMethodKeys);
    auto spec = method_spec(m);
    spec.validate(bs.tasks);
    HeadStrategy h;
    try {
      h = parse_head_strategy(m.get<std::string>("head", "separate"));
    } catch (const Error&) {
      throw ConfigError("key '" + m.where("head") + "' must be separate, union or reuse");
    }
    plan.push_back({spec, h});
  }
  const auto seeds = seed_list(top, r, {1, 2, 3});
  r.manifest.seeds = seeds;
  const bool retrain = top.get<bool>("retrain_head", true);

  std::vector<ContinualResult> results;
  json details = json::array();
  const auto t0 = Clock::now();
  for (auto seed : seeds) {
    const auto ts = blob_task_suite(bs, RngStream(seed, {"cont"}));
    auto c = cfg;
    c.seed = seed;
    const auto refs = single_task_references(ts.tasks, c);
    std::vector<SequenceRun> runs(plan.size());
    parallel_for(plan.size(), [&](std::size_t i) {
      runs[i] = run_sequence_full(ts.tasks, ts.future, plan[i].first, plan[i].second, c, refs);
    });
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const auto& res = runs[i].result;
      json d = res.to_json();
      d["ratio_kept"] = to_json(ratio_kept(res, res.reference_lit));
      if (retrain && plan[i].second == HeadStrategy::Separate && plan[i].first.kind != MethodKind::MultiTask) {
        const auto hr = retrain_head(runs[i].final_model, 0, ts.tasks[0], c.train_size, c.train);
        d["head_retrain_task0"] = {{"accuracy_before", hr.before}, {"accuracy_after", hr.after}};
      }
      details.push_back(d);
      results.push_back(res);
      *r.log << "seed " << seed << "  " << res.method << "/" << to_string(res.strategy) << "  all-past L_IA "
             << knats(res.all_past_lia_sum) << ", accuracy " << res.all_past_accuracy << "\n";
    }
  }
  r.time("sequences", t0);
  std::ostringstream csv;
  write_continual_csv(results, csv);
  r.emit("continual.csv", csv.str());
  r.emit("results.json", details.dump(2) + "\n");
  return kExitOk;
}

int acceptance(Run& r, const Section& top) {
  AcceptanceOptions o;
  o.only = top.get<std::vector<int>>("criteria", {});
  for (int id : o.only)
    if (id < 1 || id > kCriterionCount) throw ConfigError("key 'criteria' holds unknown criterion " + std::to_string(id));
  o.seeds = seed_list(top, r, {1, 2, 3});
  r.manifest.seeds = o.seeds;
  o.on_result = [&](const CriterionResult& c) { *r.log << format_result_line(c) << std::endl; };
  const auto t0 = Clock::now();
  const auto results = run_acceptance(o);
  r.time("criteria", t0);
  json all = json::array();
  bool ok = true;
  for (const auto& c : results) {
    all.push_back(to_json(c));
    ok = ok && c.passed;
  }
  const auto table = format_summary_table(results);
  r.emit("acceptance.json", all.dump(2) + "\n");
  r.emit("summary.txt", table);
  *r.log << "\n" << table;
  return ok ? kExitOk : kExitAcceptance;
}

int plot(Run& r, const Section& top) {
  const auto& curves = top.raw("curves");
  if (!curves.is_array() || curves.empty()) throw ConfigError("key 'curves' must be a non-empty array");
  LinePlot p;
  p.title = top.get<std::string>("title", "Coding curves");
  p.x_label = "examples coded (log scale)";
  p.y_label = "codelength per example (nats)";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    Section c(curves[i], "curves[" + std::to_string(i) + "]", {"path", "label"});
    const auto path = fs::path(c.req<std::string>("path"));
    const auto full = path.is_absolute() ? path : r.base / path;
    const auto text = read_file(full);
    const auto label = c.get<std::string>("label", path.stem().string());
    if (text.rfind("n,lit_nats", 0) == 0) {
      PlotSeries s;
      s.label = label;
      std::istringstream in(text);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream cells(line);
        std::string a, b;
        std::getline(cells, a, ',');
        std::getline(cells, b, ',');
        try {
          const double n = std::stod(a);
          if (n > 0) {
            s.x.push_back(n);
            s.y.push_back(std::stod(b));
          }
        } catch (const std::exception&) {
          throw ParseError(ParseError::Kind::BadValue, "malformed sweep CSV line in " + full.string());
        }
      }
      p.x_label = "n (log scale)";
      p.y_label = "L_IT (nats)";
      p.series.push_back(std::move(s));
    } else {
      std::istringstream in(text);
      p.series.push_back(curve_series(read_curve_csv(in), label));
    }
  }
  r.emit(top.get<std::string>("output", "plot.svg"), render_line_svg(p));
  return kExitOk;
}

int dispatch(Run& r) {
  const Section top(r.config, "", top_level_keys().at(r.kind));
  if (top.has("kind") && top.get<std::string>("kind", "") != r.kind)
    throw ConfigError("config kind '" + top.get<std::string>("kind", "") + "' does not match subcommand '" + r.kind + "'");
  if (r.kind == "gen-data") return gen_data(r, top);
  if (r.kind == "preq") return preq(r, top);
  if (r.kind == "lit") return lit(r, top);
  if (r.kind == "lia") return lia(r, top);
  if (r.kind == "sweep") return sweep(r, top);
  if (r.kind == "dissect") return dissect(r, top);
  if (r.kind == "continual") return continual(r, top);
  if (r.kind == "acceptance") return acceptance(r, top);
  return plot(r, top);
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"preqinfo: prequential information measures"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  std::size_t jobs = 0;
  std::optional<std::uint64_t> seed;
  for (const auto& kind : kKinds) {
    auto* sub = app.add_subcommand(kind, "run the " + kind + " pipeline");
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker threads (fallback: PREQINFO_JOBS)");
    sub->add_option("--seed", seed, "experiment seed (overrides the config)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  Run r;
  r.kind = app.get_subcommands().front()->get_name();
  r.log = &out;
  try {
    const fs::path cfg_path(config_path);
    std::ifstream in(cfg_path);
    if (!in) throw ConfigError("cannot read config " + config_path);
    try {
      r.config = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!r.config.is_object()) throw ConfigError("config must be a JSON object");
    if (seed) {
      r.config["seed"] = *seed;
      if (r.config.contains("seeds")) r.config["seeds"] = json::array({*seed});
      r.seed_override = seed;
    }
    r.seed = r.config.value("seed", std::uint64_t{1});
    r.base = cfg_path.has_parent_path() ? cfg_path.parent_path() : fs::path(".");
    r.out = out_dir;
    r.manifest.kind = r.kind;
    r.manifest.config_hash = sha256_hex(r.config.dump());
    r.manifest.seeds = {r.seed};
    set_default_jobs(resolve_jobs(jobs));
    fs::create_directories(r.out);
    const int code = dispatch(r);
    r.finish();
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InvalidArgument& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace preqinfo::cli
