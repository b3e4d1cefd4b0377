#include <doctest.h>

#include <filesystem>
#include <regex>

#include "preqinfo/export.hpp"

using namespace preqinfo;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

  const auto dir = std::filesystem::temp_directory_path() / "preqinfo_export_test";
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "abc.txt", "abc");
  CHECK(read_file(dir / "abc.txt") == "abc");
  CHECK(sha256_file(dir / "abc.txt") == sha256_hex("abc"));

  RunManifest m;
  m.kind = "test";
  m.add_file(dir, "abc.txt");
  const auto j = m.to_json();
  CHECK(j.at("files").at(0).at("sha256") == sha256_hex("abc"));
  CHECK(j.at("files").at(0).at("bytes") == 3);
  CHECK(j.at("version") == kToolkitVersion);
  CHECK_THROWS(read_file(dir / "missing.txt"));
}

TEST_CASE("line chart") {
  LinePlot plot;
  plot.title = "curve";
  plot.series.push_back({"run", {10, 1000}, {2.0, 1.0}});
  const auto svg = render_line_svg(plot);
  CHECK(count(svg, "<polyline") == 1);
  const std::regex points("points=\"([^\"]*)\"");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, points));
  const std::string pts = m[1];
  CHECK(std::count(pts.begin(), pts.end(), ',') == 2);
  CHECK(render_line_svg(plot) == svg);
  CHECK(svg.find("run") != std::string::npos);

  plot.series[0].x = {0.0, 1.0};
  CHECK_THROWS(render_line_svg(plot));
}

TEST_CASE("log axis ticks sit at powers of ten") {
  LinePlot plot;
  plot.series.push_back({"sweep", {10, 30, 100, 300, 1000, 4000}, {1, 2, 3, 4, 5, 5.5}});
  const auto svg = render_line_svg(plot);
  for (const char* label : {">1e1<", ">1e2<", ">1e3<", ">1e4<"}) CHECK(svg.find(label) != std::string::npos);
  CHECK(count(svg, "class=\"xtick\"") == 4);
}

TEST_CASE("curve series") {
  std::vector<CurveRow> rows(2);
  rows[0].t_end = 8;
  rows[0].mean = 2.3;
  rows[1].t_end = 20;
  rows[1].mean = 1.1;
  const auto s = curve_series(rows, "c");
  CHECK(s.x == std::vector<double>{8, 20});
  CHECK(s.y == std::vector<double>{2.3, 1.1});
}

TEST_CASE("Venn diagram") {
  VennComponents v;
  v.shared = 0.73;
  v.specific_v = 0.34;
  v.specific_a = 1.45;
  v.category = 0.5;
  const auto svg = render_venn_svg(v);
  CHECK(count(svg, "<circle") == 3);
  CHECK(svg.find("k-nats") != std::string::npos);
  CHECK(render_venn_svg(v) == svg);
}
