#include "config.hpp"

#include <fstream>

#include "preqinfo/error.hpp"

namespace preqinfo::cli {

Section::Section(const nlohmann::json& j, std::string path, std::set<std::string> allowed)
    : j_(j), path_(std::move(path)) {
  if (!j.is_object()) throw ConfigError("'" + (path_.empty() ? std::string("config") : path_) + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + where(key) + "'");
}

const nlohmann::json& Section::raw(const std::string& key) const {
  if (!has(key)) throw ConfigError("missing required key '" + where(key) + "'");
  return j_.at(key);
}

Section Section::sub(const std::string& key, std::set<std::string> allowed) const {
  return Section(raw(key), where(key), std::move(allowed));
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

DataBundle load_data(const Section& s, std::uint64_t seed, const std::filesystem::path& base) {
  const auto type = s.req<std::string>("type");
  RngStream rng(seed, {"data", type});
  DataBundle b;
  if (type == "bigram") {
    auto g = gen_bigram_corpus(s.req<std::size_t>("vocab"), s.req<std::size_t>("free_rows"), s.req<std::size_t>("n"),
                               s.get<double>("alpha", 0.1), rng);
    b.data = std::move(g.data);
    b.truth = std::move(g.truth);
  } else if (type == "hierarchical") {
    HierGeometry geo;
    geo.between = s.get<double>("between", geo.between);
    geo.within = s.get<double>("within", geo.within);
    geo.variance = s.get<double>("variance", geo.variance);
    const auto classes = s.req<std::vector<std::size_t>>("classes_per_category");
    auto g = gen_hier_classification(classes, s.get<std::size_t>("input_dim", 16), geo, s.req<std::size_t>("n"), rng);
    b.data = std::move(g.data);
    b.truth = std::move(g.truth);
  } else if (type == "jsonl") {
    const auto path = resolve(base, s.req<std::string>("path"));
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file " + path.string());
    const auto input = s.get<std::string>("input", "dense");
    if (input != "dense" && input != "token") throw ConfigError("key '" + s.where("input") + "' must be dense or token");
    b.data = read_jsonl(in, s.req<std::size_t>("num_classes"), input == "token" ? InputKind::Token : InputKind::Dense);
  } else if (type == "idx") {
    b.data = load_idx(resolve(base, s.req<std::string>("images")), resolve(base, s.req<std::string>("labels")));
  } else {
    throw ConfigError("key '" + s.where("type") + "' must be bigram, hierarchical, jsonl or idx");
  }
  if (s.get<bool>("randomize_labels", false)) {
    b.data = randomize_labels(b.data, rng.child("randomize"));
    b.truth.reset();
  }
  if (s.get<bool>("permute_labels", false)) {
    b.data = permute_labels(b.data, rng.child("permute"));
    b.truth.reset();
  }
  return b;
}

ModelSpec model_spec(const Section& s, const LabeledDataset& data) {
  const auto type = s.req<std::string>("type");
  ModelSpec spec;
  if (type == "softmax") {
    spec = ModelSpec::softmax_regression(data.input_dim(), data.num_classes);
  } else if (type == "mlp") {
    spec = ModelSpec::mlp(data.input_dim(), s.get<std::size_t>("hidden", 64), data.num_classes);
  } else if (type == "bigram") {
    spec = ModelSpec::bigram_lm(data.num_classes, s.get<std::size_t>("embed_dim", 4));
  } else {
    throw ConfigError("key '" + s.where("type") + "' must be softmax, mlp or bigram");
  }
  spec.validate();
  return spec;
}

ModelState initial_model(const Section& s, const LabeledDataset& data, std::uint64_t seed,
                         const std::filesystem::path& base) {
  if (s.has("checkpoint")) return load_checkpoint(resolve(base, s.req<std::string>("checkpoint")));
  return init_model(model_spec(s, data), RngStream(seed, {"init"}));
}

TrainConfig train_config(const Section& s) {
  TrainConfig t;
  const auto opt = s.get<std::string>("optimizer", "adam");
  if (opt == "adam") {
    t.optimizer.kind = OptimizerKind::Adam;
  } else if (opt == "sgd") {
    t.optimizer.kind = OptimizerKind::SgdMomentum;
  } else {
    throw ConfigError("key '" + s.where("optimizer") + "' must be adam or sgd");
  }
  t.optimizer.learning_rate = s.get<double>("learning_rate", t.optimizer.learning_rate);
  t.optimizer.momentum = s.get<double>("momentum", t.optimizer.momentum);
  t.batch_size = s.get<std::size_t>("batch_size", t.batch_size);
  t.max_epochs = s.get<std::size_t>("max_epochs", t.max_epochs);
  t.patience = s.get<std::size_t>("patience", t.patience);
  t.heldout_fraction = s.get<double>("heldout_fraction", t.heldout_fraction);
  t.min_heldout = s.get<std::size_t>("min_heldout", t.min_heldout);
  return t;
}

PreqConfig preq_config(const Section& s, std::uint64_t seed) {
  PreqConfig p;
  p.seed = seed;
  p.first_segment = s.get<std::size_t>("first_segment", p.first_segment);
  p.growth = s.get<double>("growth", p.growth);
  p.warm_start = s.get<bool>("warm_start", p.warm_start);
  const auto mode = s.get<std::string>("first_segment_mode", "auto");
  if (mode != "auto") {
    try {
      p.first_segment_mode = parse_first_segment_mode(mode);
    } catch (const Error&) {
      throw ConfigError("key '" + s.where("first_segment_mode") + "' must be auto, uniform or model");
    }
  }
  if (s.has("train")) p.train = train_config(s.sub("train", kTrainKeys));
  return p;
}

MethodSpec method_spec(const Section& s) {
  const auto name = s.req<std::string>("method");
  const double c = s.get<double>("c", 0.0);
  MethodSpec m;
  if (name == "plain") {
    m = MethodSpec::plain();
  } else if (name == "l2") {
    m = MethodSpec::l2(c);
  } else if (name == "ewc") {
    m = MethodSpec::ewc(c, s.get<std::size_t>("fisher_samples", 200));
  } else if (name == "multi-task") {
    m = MethodSpec::multitask();
  } else if (name == "imm") {
    const auto merge = s.get<std::string>("merge", "mean");
    const auto transfer = s.get<std::string>("transfer", "weight");
    if (merge != "mean" && merge != "mode") throw ConfigError("key '" + s.where("merge") + "' must be mean or mode");
    if (transfer != "weight" && transfer != "l2")
      throw ConfigError("key '" + s.where("transfer") + "' must be weight or l2");
    m = MethodSpec::imm(merge == "mean" ? ImmMerge::Mean : ImmMerge::Mode,
                        transfer == "weight" ? ImmTransfer::Weight : ImmTransfer::L2, c,
                        s.get<std::vector<double>>("alphas", {}));
    m.fisher_samples = s.get<std::size_t>("fisher_samples", m.fisher_samples);
  } else {
    throw ConfigError("key '" + s.where("method") + "' must be plain, l2, ewc, imm or multi-task");
  }
  return m;
}

}  // namespace preqinfo::cli
