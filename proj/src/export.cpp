#include "preqinfo/export.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "preqinfo/error.hpp"

namespace preqinfo {

namespace {

std::string hex(const unsigned char* data, unsigned len) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    s.push_back(digits[data[i] >> 4]);
    s.push_back(digits[data[i] & 15]);
  }
  return s;
}

struct DigestCtx {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  DigestCtx() {
    PREQINFO_CHECK(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1, Error, "sha256 init failed");
  }
  void update(const void* p, std::size_t n) {
    PREQINFO_CHECK(EVP_DigestUpdate(ctx.get(), p, n) == 1, Error, "sha256 update failed");
  }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    PREQINFO_CHECK(EVP_DigestFinal_ex(ctx.get(), md, &len) == 1, Error, "sha256 final failed");
    return hex(md, len);
  }
};

std::string num(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  std::string s = buf;
  if (s == "-0.00" || s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// "nice" linear ticks covering [lo, hi]
std::vector<double> linear_ticks(double lo, double hi) {
  if (hi <= lo) hi = lo + 1.0;
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return t;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  DigestCtx d;
  d.update(bytes.data(), bytes.size());
  return d.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw ParseError(ParseError::Kind::Io, "cannot open " + path.string());
  DigestCtx d;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    d.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return d.finish();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    PREQINFO_CHECK(out.good(), Error, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    PREQINFO_CHECK(out.good(), Error, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw ParseError(ParseError::Kind::Io, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void RunManifest::add_file(const std::filesystem::path& dir, const std::string& relative) {
  const auto p = dir / relative;
  files.push_back({relative, sha256_file(p), std::filesystem::file_size(p)});
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& f : files) fs.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return {{"kind", kind},   {"config_sha256", config_hash}, {"version", version},
          {"seeds", seeds}, {"files", fs},                  {"timings_seconds", timings_seconds}};
}

void save_curve(const CodingCurve& curve, const std::filesystem::path& dir, const std::string& stem,
                RunManifest* manifest) {
  std::ostringstream csv;
  write_curve_csv(curve, csv);
  write_file_atomic(dir / (stem + ".csv"), csv.str());
  write_file_atomic(dir / (stem + ".json"), curve.to_json().dump(2) + "\n");
  if (manifest) {
    manifest->add_file(dir, stem + ".csv");
    manifest->add_file(dir, stem + ".json");
  }
}

PlotSeries curve_series(const std::vector<CurveRow>& rows, const std::string& label) {
  PlotSeries s;
  s.label = label;
  for (const auto& r : rows) {
    s.x.push_back(static_cast<double>(r.t_end));
    s.y.push_back(r.mean);
  }
  return s;
}

std::string render_line_svg(const LinePlot& plot) {
  PREQINFO_CHECK(!plot.series.empty(), InvalidArgument, "plot needs at least one series");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : plot.series) {
    PREQINFO_CHECK(s.x.size() == s.y.size() && !s.x.empty(), InvalidArgument,
                   "series '" + s.label + "' needs matching, non-empty x and y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      PREQINFO_CHECK(std::isfinite(s.x[i]) && std::isfinite(s.y[i]), InvalidArgument, "plot values must be finite");
      PREQINFO_CHECK(!plot.log_x || s.x[i] > 0.0, InvalidArgument, "log-x plot needs positive x values");
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  const double W = 640, H = 420, L = 70, R = 160, T = 40, B = 55;
  const double pw = W - L - R, ph = H - T - B;

  double lx0, lx1;
  std::vector<double> xticks;
  if (plot.log_x) {
    const int e0 = static_cast<int>(std::floor(std::log10(xmin)));
    int e1 = static_cast<int>(std::ceil(std::log10(xmax)));
    if (e1 == e0) ++e1;
    lx0 = e0;
    lx1 = e1;
    for (int e = e0; e <= e1; ++e) xticks.push_back(std::pow(10.0, e));
  } else {
    xticks = linear_ticks(xmin, xmax);
    lx0 = std::min(xmin, xticks.front());
    lx1 = std::max(xmax, xticks.back());
    if (lx1 <= lx0) lx1 = lx0 + 1.0;
  }
  auto yt = linear_ticks(ymin, ymax);
  const double ly0 = std::min(ymin, yt.front()), ly1 = std::max(ymax, yt.back()) > ly0 ? std::max(ymax, yt.back()) : ly0 + 1.0;
  auto px = [&](double x) { return L + ((plot.log_x ? std::log10(x) : x) - lx0) / (lx1 - lx0) * pw; };
  auto py = [&](double y) { return T + ph - (y - ly0) / (ly1 - ly0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W, 0) << "\" height=\"" << num(H, 0)
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << num(W, 0) << "\" height=\"" << num(H, 0) << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(L + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(plot.title)
    << "</text>\n";
  o << "<rect x=\"" << num(L) << "\" y=\"" << num(T) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double x : xticks) {
    const double X = px(x);
    o << "<line class=\"xtick\" x1=\"" << num(X) << "\" y1=\"" << num(T + ph) << "\" x2=\"" << num(X) << "\" y2=\""
      << num(T + ph + 5) << "\" stroke=\"black\"/>\n";
    std::string label;
    if (plot.log_x) {
      label = "1e" + std::to_string(static_cast<int>(std::lround(std::log10(x))));
    } else {
      label = num(x, std::abs(x) >= 10 || x == std::floor(x) ? 0 : 2);
    }
    o << "<text x=\"" << num(X) << "\" y=\"" << num(T + ph + 18) << "\" text-anchor=\"middle\">" << label << "</text>\n";
  }
  for (double y : yt) {
    const double Y = py(y);
    o << "<line class=\"ytick\" x1=\"" << num(L - 5) << "\" y1=\"" << num(Y) << "\" x2=\"" << num(L) << "\" y2=\""
      << num(Y) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(L - 8) << "\" y=\"" << num(Y + 4) << "\" text-anchor=\"end\">"
      << num(y, std::abs(y) >= 10 || y == std::floor(y) ? 0 : 2) << "</text>\n";
  }
  o << "<text x=\"" << num(L + pw / 2) << "\" y=\"" << num(H - 12) << "\" text-anchor=\"middle\">"
    << escape(plot.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << num(T + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num(T + ph / 2) << ")\">" << escape(plot.y_label) << "</text>\n";
  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& ser = plot.series[s];
    const char* colour = kPalette[s % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i) o << (i ? " " : "") << num(px(ser.x[i])) << "," << num(py(ser.y[i]));
    o << "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(s);
    o << "<line x1=\"" << num(L + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(L + pw + 32) << "\" y2=\""
      << num(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(L + pw + 38) << "\" y=\"" << num(ly + 4) << "\">" << escape(ser.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

namespace {

double lens_area(double r1, double r2, double d) {
  if (d >= r1 + r2) return 0.0;
  if (d <= std::abs(r1 - r2)) return std::numbers::pi * std::pow(std::min(r1, r2), 2);
  const double a = r1 * r1 * std::acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1));
  const double b = r2 * r2 * std::acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2));
  const double c = 0.5 * std::sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2));
  return a + b - c;
}

// centre distance whose lens has the requested area
double distance_for_overlap(double r1, double r2, double area) {
  double lo = std::abs(r1 - r2), hi = r1 + r2;
  if (area <= 0.0) return hi;
  if (area >= lens_area(r1, r2, lo)) return lo;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (lens_area(r1, r2, mid) > area) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::string render_venn_svg(const VennComponents& v) {
  const double lv = v.specific_v + v.shared, la = v.specific_a + v.shared, lc = v.category;
  const double biggest = std::max({lv, la, lc, 1e-12});
  const double rmax = 110.0;
  // area proportional to k-nats: r = rmax * sqrt(value / biggest)
  auto radius = [&](double x) { return rmax * std::sqrt(std::max(0.0, x) / biggest); };
  const double rv = radius(lv), ra = radius(la), rc = radius(lc);
  const double overlap = std::numbers::pi * rmax * rmax * v.shared / biggest;
  const double d = (rv > 0 && ra > 0) ? distance_for_overlap(rv, ra, overlap) : rv + ra;
  const double cx = 330, cy = 170;
  const double xv = cx - d / 2, xa = cx + d / 2;
  const double yc = cy + std::max(rv, ra) + rc + 10;
  const double H = yc + rc + 70;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"660\" height=\"" << num(H, 0)
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"660\" height=\"" << num(H, 0) << "\" fill=\"white\"/>\n";
  o << "<text x=\"330\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">Information decomposition (k-nats)</text>\n";
  o << "<circle class=\"set-v\" cx=\"" << num(xv) << "\" cy=\"" << num(cy) << "\" r=\"" << num(rv)
    << "\" fill=\"#1f77b4\" fill-opacity=\"0.35\" stroke=\"#1f77b4\"/>\n";
  o << "<circle class=\"set-a\" cx=\"" << num(xa) << "\" cy=\"" << num(cy) << "\" r=\"" << num(ra)
    << "\" fill=\"#d62728\" fill-opacity=\"0.35\" stroke=\"#d62728\"/>\n";
  o << "<circle class=\"set-category\" cx=\"" << num(cx) << "\" cy=\"" << num(yc) << "\" r=\"" << num(rc)
    << "\" fill=\"#2ca02c\" fill-opacity=\"0.35\" stroke=\"#2ca02c\"/>\n";
  auto label = [&](double x, double y, const std::string& text) {
    o << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"middle\">" << escape(text) << "</text>\n";
  };
  label(xv - rv / 2, cy, "T_V only " + num(v.specific_v / 1000.0, 3));
  label(xa + ra / 2, cy, "T_A only " + num(v.specific_a / 1000.0, 3));
  label(cx, cy - std::max(rv, ra) - 8, "shared " + num(v.shared / 1000.0, 3) + " (alt " + num(v.shared_alt / 1000.0, 3) + ")");
  label(cx, yc + 4, "category " + num(v.category / 1000.0, 3));
  if (!v.clipped.empty()) {
    std::string c = "clipped to 0:";
    for (const auto& s : v.clipped) c += " " + s;
    label(330, H - 20, c);
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace preqinfo
