#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "preqinfo/export.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "preqinfo");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Invocation r;
  r.code = preqinfo::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path workdir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "preqinfo_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

const json kGenData = {{"kind", "gen-data"},
                       {"seed", 3},
                       {"data", {{"type", "bigram"}, {"vocab", 6}, {"free_rows", 2}, {"n", 50}}}};

}  // namespace

TEST_CASE("gen-data writes a dataset and a manifest") {
  const auto dir = workdir("gen");
  const auto cfg = write_config(dir, kGenData);
  const auto r = invoke({"gen-data", "--config", cfg.string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  const auto manifest = json::parse(preqinfo::read_file(dir / "out" / "manifest.json"));
  CHECK(manifest.at("kind") == "gen-data");
  bool listed = false;
  for (const auto& f : manifest.at("files")) {
    CHECK(f.at("sha256") == preqinfo::sha256_file(dir / "out" / f.at("path").get<std::string>()));
    listed = listed || f.at("path") == "data.jsonl";
  }
  CHECK(listed);

  std::ifstream data(dir / "out" / "data.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(data, line);) ++lines;
  CHECK(lines == 50);

  const auto again = invoke({"gen-data", "--config", cfg.string(), "--out", (dir / "again").string()});
  REQUIRE(again.code == 0);
  CHECK(preqinfo::read_file(dir / "out" / "data.jsonl") == preqinfo::read_file(dir / "again" / "data.jsonl"));
}

TEST_CASE("--seed overrides the config seed") {
  const auto dir = workdir("seed");
  const auto cfg = write_config(dir, kGenData);
  REQUIRE(invoke({"gen-data", "--config", cfg.string(), "--out", (dir / "a").string(), "--seed", "9"}).code == 0);
  const auto manifest = json::parse(preqinfo::read_file(dir / "a" / "manifest.json"));
  CHECK(manifest.at("seeds") == json::array({9}));
}

TEST_CASE("validation failures exit with code 2") {
  const auto dir = workdir("bad");
  auto bad = kGenData;
  bad["colour"] = "blue";
  auto r = invoke({"gen-data", "--config", write_config(dir, bad).string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);

  bad = kGenData;
  bad["data"]["bogus"] = 1;
  r = invoke({"gen-data", "--config", write_config(dir, bad).string(), "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("data.bogus") != std::string::npos);

  bad = kGenData;
  bad["data"]["free_rows"] = 60;
  CHECK(invoke({"gen-data", "--config", write_config(dir, bad).string(), "--out", (dir / "o").string()}).code == 2);

  CHECK(invoke({"gen-data", "--config", (dir / "nope.json").string()}).code == 2);
  CHECK(invoke({"frobnicate", "--config", "x"}).code == 2);
}

TEST_CASE("preq run and plot") {
  const auto dir = workdir("preq");
  const json cfg = {{"kind", "preq"},
                    {"seed", 2},
                    {"data", {{"type", "bigram"}, {"vocab", 6}, {"free_rows", 3}, {"n", 200}}},
                    {"model", {{"type", "bigram"}, {"embed_dim", 2}}}};
  const auto out = dir / "run";
  REQUIRE(invoke({"preq", "--config", write_config(dir, cfg).string(), "--out", out.string()}).code == 0);
  CHECK(fs::exists(out / "curve.csv"));
  CHECK(fs::exists(out / "curve.svg"));

  const json plot = {{"kind", "plot"}, {"curves", json::array({{{"path", (out / "curve.csv").string()}, {"label", "bigram"}}})}};
  const auto pcfg = dir / "plot.json";
  std::ofstream(pcfg) << plot.dump();
  REQUIRE(invoke({"plot", "--config", pcfg.string(), "--out", (dir / "p1").string()}).code == 0);
  REQUIRE(invoke({"plot", "--config", pcfg.string(), "--out", (dir / "p2").string()}).code == 0);
  CHECK(preqinfo::read_file(dir / "p1" / "plot.svg") == preqinfo::read_file(dir / "p2" / "plot.svg"));
}
