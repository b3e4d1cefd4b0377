#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "preqinfo/analysis.hpp"
#include "preqinfo/preqcode.hpp"

namespace preqinfo {

inline constexpr const char* kToolkitVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string kind;
  std::string config_hash;
  std::string version = kToolkitVersion;
  std::vector<std::uint64_t> seeds;
  std::vector<ManifestEntry> files;
  std::map<std::string, double> timings_seconds;

  /// Hashes `dir / relative` and records it.
  void add_file(const std::filesystem::path& dir, const std::string& relative);
  nlohmann::json to_json() const;
};

/// Curve CSV plus a JSON sidecar (`<stem>.json`) with the curve metadata.
void save_curve(const CodingCurve& curve, const std::filesystem::path& dir, const std::string& stem,
                RunManifest* manifest = nullptr);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = true;
  std::vector<PlotSeries> series;
};

/// Deterministic SVG line chart; with log_x, ticks sit at powers of 10.
std::string render_line_svg(const LinePlot& plot);

/// Coding-curve chart: per-example segment codelength against segment end.
PlotSeries curve_series(const std::vector<CurveRow>& rows, const std::string& label);

/// Two overlapping circles (T_V, T_A) and a category circle, areas proportional to k-nats.
std::string render_venn_svg(const VennComponents& venn);

}  // namespace preqinfo
