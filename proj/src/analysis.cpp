#include "preqinfo/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "preqinfo/error.hpp"
#include "preqinfo/infomeasure.hpp"
#include "preqinfo/jobs.hpp"

namespace preqinfo {

// ---- registry -------------------------------------------------------------

void TaskRegistry::add(const std::string& name, LabeledDataset data) {
  std::vector<LabeledDataset> pools;
  pools.push_back(std::move(data));
  add(name, std::move(pools));
}

void TaskRegistry::add(const std::string& name, std::vector<LabeledDataset> pools) {
  PREQINFO_CHECK(!name.empty(), InvalidArgument, "task name must not be empty");
  PREQINFO_CHECK(!pools.empty(), InvalidArgument, "task '" + name + "' has no data");
  for (const auto& p : pools) {
    PREQINFO_CHECK(p.num_classes == pools.front().num_classes, IncompatibleError,
                   "pools of task '" + name + "' disagree on the label space");
  }
  PREQINFO_CHECK(name.find("->") == std::string::npos, InvalidArgument, "task name must not contain '->'");
  PREQINFO_CHECK(!contains(name), InvalidArgument, "task '" + name + "' registered twice");
  index_[name] = static_cast<std::uint32_t>(names_.size());
  names_.push_back(name);
  pools_.push_back(std::move(pools));
}

const LabeledDataset& TaskRegistry::get(const std::string& name, std::size_t position) const {
  const auto& pools = pools_[id(name)];
  return pools[std::min(position, pools.size() - 1)];
}

std::uint32_t TaskRegistry::id(const std::string& name) const {
  auto it = index_.find(name);
  PREQINFO_CHECK(it != index_.end(), MissingOperand, "unknown task '" + name + "'");
  return it->second;
}

TaskRegistry hierarchical_suite(const GaussianMixture& gm, std::size_t pool_size, RngStream rng,
                                std::size_t blobs_per_class) {
  PREQINFO_CHECK(pool_size >= 2, InvalidArgument, "hierarchical suite needs pool_size >= 2");
  PREQINFO_CHECK(blobs_per_class >= 1, InvalidArgument, "blobs_per_class must be >= 1");
  // components of each category, in order; class = position / blobs_per_class
  std::vector<std::size_t> comps[2];
  for (std::size_t c = 0; c < gm.category_of.size(); ++c) {
    if (gm.category_of[c] < 2) comps[gm.category_of[c]].push_back(c);
  }
  PREQINFO_CHECK(!comps[0].empty() && !comps[1].empty(), InvalidArgument, "hierarchical suite needs two categories");
  std::size_t classes[2];
  for (int g = 0; g < 2; ++g) {
    PREQINFO_CHECK(comps[g].size() % blobs_per_class == 0, InvalidArgument,
                   "category component count is not a multiple of blobs_per_class");
    classes[g] = comps[g].size() / blobs_per_class;
  }
  TaskSpec v{"T_V", comps[0], {}}, a{"T_A", comps[1], {}}, va{"T_VA", {}, {}}, full{"T_full", {}, {}};
  for (std::size_t i = 0; i < comps[0].size(); ++i) v.remap.push_back(i / blobs_per_class);
  for (std::size_t i = 0; i < comps[1].size(); ++i) a.remap.push_back(i / blobs_per_class);
  for (int g = 0; g < 2; ++g) {
    for (std::size_t i = 0; i < comps[g].size(); ++i) {
      va.filter.push_back(comps[g][i]);
      va.remap.push_back(static_cast<std::size_t>(g));
      full.filter.push_back(comps[g][i]);
      full.remap.push_back((g == 0 ? 0 : classes[0]) + i / blobs_per_class);
    }
  }
  std::vector<LabeledDataset> pv, pa, pva, pfull;
  for (std::size_t p = 0; p < 3; ++p) {
    const auto pool = sample_mixture(gm, pool_size, rng.child("pool").child(p), full.filter);
    pv.push_back(subtask(pool, v));
    pa.push_back(subtask(pool, a));
    pva.push_back(subtask(pool, va));
    pfull.push_back(subtask(pool, full));
  }
  TaskRegistry r;
  r.add("T_V", std::move(pv));
  r.add("T_A", std::move(pa));
  r.add("T_VA", std::move(pva));
  r.add("T_full", std::move(pfull));
  return r;
}

// ---- chains ---------------------------------------------------------------

ChainSpec ChainSpec::parse(const std::string& text) {
  ChainSpec c;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find("->", pos);
    auto part = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    const auto b = part.find_first_not_of(" \t"), e = part.find_last_not_of(" \t");
    PREQINFO_CHECK(b != std::string::npos, InvalidArgument, "empty task name in chain '" + text + "'");
    c.tasks.push_back(part.substr(b, e - b + 1));
    if (next == std::string::npos) break;
    pos = next + 2;
  }
  PREQINFO_CHECK(c.tasks.size() <= 3, InvalidArgument, "chains have at most three tasks");
  return c;
}

std::string ChainSpec::name() const {
  std::string s;
  for (std::size_t i = 0; i < tasks.size(); ++i) s += (i ? "->" : "") + tasks[i];
  return s;
}

ChainSpec ChainSpec::prefix(std::size_t length) const {
  PREQINFO_CHECK(length <= tasks.size(), InvalidArgument, "chain prefix longer than the chain");
  return {{tasks.begin(), tasks.begin() + static_cast<std::ptrdiff_t>(length)}};
}

void ChainSpec::validate(const TaskRegistry& registry) const {
  PREQINFO_CHECK(!tasks.empty() && tasks.size() <= 3, InvalidArgument, "chains have 1 to 3 tasks");
  for (const auto& t : tasks) PREQINFO_CHECK(registry.contains(t), MissingOperand, "chain names unknown task '" + t + "'");
}

void DissectionConfig::validate() const {
  PREQINFO_CHECK(train_fraction > 0.0 && train_fraction < 1.0, InvalidArgument,
                 "dissection train_fraction must lie in (0, 1)");
  PREQINFO_CHECK(!seeds.empty(), InvalidArgument, "dissection needs at least one seed");
  PREQINFO_CHECK(tolerance > 0.0, InvalidArgument, "identity tolerance must be positive");
  preq.validate();
}

std::optional<ChainHop> ChainCache::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = hops_.find(key);
  if (it == hops_.end()) return std::nullopt;
  ++hits_;
  return it->second;
}

void ChainCache::store(const std::string& key, const ChainHop& hop) {
  std::lock_guard lock(mu_);
  hops_[key] = hop;
}

std::size_t ChainCache::size() const {
  std::lock_guard lock(mu_);
  return hops_.size();
}

std::size_t ChainCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::pair<std::size_t, std::size_t> hop_split(const DissectionConfig& cfg, std::size_t task_size) {
  const auto n = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(task_size)));
  PREQINFO_CHECK(n >= 1 && n < task_size, InvalidArgument,
                 "task of " + std::to_string(task_size) + " examples is too small to split");
  return {n, task_size - n};
}

namespace {

ChainHop chain_hop(const ChainSpec& chain, const TaskRegistry& registry, const DissectionConfig& cfg,
                   std::uint64_t seed, ChainCache& cache) {
  const std::string key = chain.name() + "#" + std::to_string(seed);
  if (auto hit = cache.find(key)) return *hit;

  const auto& task = chain.tasks.back();
  const auto& data = registry.get(task, chain.tasks.size() - 1);
  const auto [n, k] = hop_split(cfg, data.size());
  const RngStream root(seed, {"dissect"});
  ModelState start;
  if (chain.tasks.size() == 1) {
    start = init_model(cfg.spec.with_outputs(data.num_classes), root.child("init"));
  } else {
    start = chain_hop(chain.prefix(chain.tasks.size() - 1), registry, cfg, seed, cache).model;
  }
  start = reset_head(start, HeadStrategy::Separate, registry.id(task), root, data.num_classes);

  PreqConfig pc = cfg.preq;
  pc.seed = root.child("preq").child(chain.name()).key();
  const auto run = information_transfer_run(start, data, n, k, pc);
  ChainHop hop{run.theta_n, run.report.value};
  hop.model.lineage.push_back("chain " + chain.name());
  cache.store(key, hop);
  return hop;
}

}  // namespace

double run_chain(const ChainSpec& chain, const TaskRegistry& registry, const DissectionConfig& cfg,
                 std::uint64_t seed, ChainCache& cache) {
  chain.validate(registry);
  cfg.validate();
  return chain_hop(chain, registry, cfg, seed, cache).lit;
}

ModelState chain_model(const ChainSpec& chain, const TaskRegistry& registry, const DissectionConfig& cfg,
                       std::uint64_t seed, ChainCache& cache) {
  chain.validate(registry);
  cfg.validate();
  return chain_hop(chain, registry, cfg, seed, cache).model;
}

std::vector<ChainSpec> dissection_chains() {
  const char* names[] = {"T_V",         "T_A",         "T_VA",           "T_full",         "T_V->T_A",
                         "T_A->T_V",    "T_V->T_full", "T_A->T_full",    "T_VA->T_full",   "T_V->T_A->T_V",
                         "T_A->T_V->T_A", "T_V->T_A->T_VA", "T_A->T_V->T_VA", "T_V->T_A->T_full", "T_A->T_V->T_full"};
  std::vector<ChainSpec> out;
  for (const char* n : names) out.push_back(ChainSpec::parse(n));
  return out;
}

// ---- report ---------------------------------------------------------------

double DissectionReport::value(const std::string& chain) const {
  auto it = chains.find(chain);
  PREQINFO_CHECK(it != chains.end(), MissingOperand, "dissection report has no chain '" + chain + "'");
  return it->second.median;
}

nlohmann::json DissectionReport::to_json() const {
  nlohmann::json cs = nlohmann::json::object();
  for (const auto& [name, s] : chains) cs[name] = preqinfo::to_json(s);
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& r : identities) {
    ids.push_back({{"id", r.id},
                   {"expression", r.expression},
                   {"lhs_nats", r.lhs},
                   {"rhs_nats", r.rhs},
                   {"residual", r.residual ? nlohmann::json(*r.residual) : nlohmann::json()},
                   {"within_tolerance", r.within_tolerance}});
  }
  nlohmann::json v;
  if (venn) {
    v = {{"shared_nats", venn->shared},
         {"shared_alt_nats", venn->shared_alt},
         {"shared_gap", venn->shared_gap},
         {"specific_v_nats", venn->specific_v},
         {"specific_a_nats", venn->specific_a},
         {"category_nats", venn->category},
         {"clipped", venn->clipped}};
  }
  return {{"chains", cs}, {"identities", ids}, {"venn", v}, {"tolerance", tolerance},
          {"train_fraction", train_fraction}, {"seeds", seeds}};
}

DissectionReport run_dissection(const TaskRegistry& registry, std::span<const ChainSpec> chains,
                                const DissectionConfig& cfg, ChainCache& cache) {
  cfg.validate();
  for (const auto& c : chains) c.validate(registry);
  // shorter chains first so longer ones find their prefixes cached
  std::vector<std::vector<double>> values(chains.size(), std::vector<double>(cfg.seeds.size()));
  for (std::size_t len = 1; len <= 3; ++len) {
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      if (chains[c].tasks.size() != len) continue;
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) jobs.emplace_back(c, s);
    }
    parallel_for(
        jobs.size(),
        [&](std::size_t j) {
          const auto [c, s] = jobs[j];
          values[c][s] = chain_hop(chains[c], registry, cfg, cfg.seeds[s], cache).lit;
        },
        cfg.preq.jobs);
  }
  DissectionReport r;
  r.tolerance = cfg.tolerance;
  r.train_fraction = cfg.train_fraction;
  r.seeds = cfg.seeds;
  for (std::size_t c = 0; c < chains.size(); ++c) r.chains[chains[c].name()] = summarize(values[c]);
  try {
    r.identities = check_identities(r, cfg.tolerance);
  } catch (const MissingOperand&) {
  }
  try {
    r.venn = venn_decompose(r);
  } catch (const MissingOperand&) {
  }
  return r;
}

namespace {

double lookup(const std::map<std::string, double>& values, const std::string& name) {
  auto it = values.find(name);
  PREQINFO_CHECK(it != values.end(), MissingOperand, "missing chain '" + name + "'");
  return it->second;
}

std::map<std::string, double> medians(const DissectionReport& report) {
  std::map<std::string, double> m;
  for (const auto& [name, s] : report.chains) m[name] = s.median;
  return m;
}

}  // namespace

std::vector<IdentityResidual> check_identities(const std::map<std::string, double>& values, double tolerance) {
  struct Term {
    double sign;
    const char* chain;
  };
  struct Identity {
    std::vector<Term> lhs;
    const char* rhs;
  };
  const std::vector<Identity> ids = {
      {{{1, "T_V"}, {1, "T_V->T_full"}}, "T_full"},
      {{{1, "T_A"}, {1, "T_A->T_full"}}, "T_full"},
      {{{1, "T_VA"}, {1, "T_VA->T_full"}}, "T_full"},
      {{{1, "T_V->T_A"}, {1, "T_V->T_A->T_full"}, {-1, "T_V->T_A->T_V"}}, "T_V->T_full"},
      {{{1, "T_A->T_V"}, {1, "T_A->T_V->T_full"}, {-1, "T_A->T_V->T_A"}}, "T_A->T_full"},
      {{{1, "T_V->T_A->T_full"}, {-1, "T_V->T_A->T_V"}}, "T_V->T_A->T_VA"},
      {{{1, "T_A->T_V->T_full"}, {-1, "T_A->T_V->T_A"}}, "T_A->T_V->T_VA"},
  };
  std::vector<IdentityResidual> out;
  int id = 1;
  for (const auto& identity : ids) {
    IdentityResidual r;
    r.id = id++;
    for (const auto& t : identity.lhs) {
      r.lhs += t.sign * lookup(values, t.chain);
      if (!r.expression.empty() || t.sign < 0) r.expression += t.sign < 0 ? " - " : " + ";
      r.expression += std::string("L(") + t.chain + ")";
    }
    r.expression += std::string(" ~ L(") + identity.rhs + ")";
    r.rhs = lookup(values, identity.rhs);
    if (std::abs(r.rhs) > 1e-12) {
      r.residual = std::abs(r.lhs - r.rhs) / std::abs(r.rhs);
      r.within_tolerance = *r.residual <= tolerance;
    }
    out.push_back(r);
  }
  return out;
}

std::vector<IdentityResidual> check_identities(const DissectionReport& report, double tolerance) {
  return check_identities(medians(report), tolerance);
}

VennComponents venn_decompose(const std::map<std::string, double>& values) {
  const double lv = lookup(values, "T_V"), la = lookup(values, "T_A");
  const double lva = lookup(values, "T_V->T_A"), lav = lookup(values, "T_A->T_V");
  const double cat = lookup(values, "T_VA");
  VennComponents v;
  auto clip = [&](const char* name, double x) {
    if (x < 0.0) {
      v.clipped.emplace_back(name);
      return 0.0;
    }
    return x;
  };
  v.shared = clip("shared", la - lva);
  v.shared_alt = clip("shared_alt", lv - lav);
  const double hi = std::max(v.shared, v.shared_alt);
  v.shared_gap = hi > 0.0 ? std::abs(v.shared - v.shared_alt) / hi : 0.0;
  v.specific_v = clip("specific_v", lv - v.shared);
  v.specific_a = clip("specific_a", la - v.shared);
  v.category = clip("category", cat);
  return v;
}

VennComponents venn_decompose(const DissectionReport& report) { return venn_decompose(medians(report)); }

double forgetting(const DissectionReport& report, const std::string& task, const std::string& other) {
  return report.value(ChainSpec{{task, other, task}}.name());
}

}  // namespace preqinfo
