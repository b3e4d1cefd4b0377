#include "preqinfo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "preqinfo/error.hpp"

namespace preqinfo {

double mean(std::span<const double> v) {
  PREQINFO_CHECK(!v.empty(), InvalidArgument, "mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::span<const double> v) {
  PREQINFO_CHECK(!v.empty(), InvalidArgument, "median of an empty sample");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t m = s.size() / 2;
  return s.size() % 2 == 1 ? s[m] : 0.5 * (s[m - 1] + s[m]);
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  return sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  PREQINFO_CHECK(x.size() == y.size() && x.size() >= 2, InvalidArgument, "pearson needs two equal samples of size >= 2");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  PREQINFO_CHECK(sxx > 0.0 && syy > 0.0, InvalidArgument, "pearson undefined for a constant sample");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x), ry = ranks(y);
  return pearson(rx, ry);
}

Summary summarize(std::span<const double> values) {
  PREQINFO_CHECK(!values.empty(), InvalidArgument, "summary of an empty sample");
  Summary s;
  s.values.assign(values.begin(), values.end());
  s.median = median(values);
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

nlohmann::json to_json(const Summary& s) {
  return {{"median", s.median}, {"min", s.min}, {"max", s.max}, {"values", s.values}};
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  PREQINFO_CHECK(x.size() == y.size() && x.size() >= 2, InvalidArgument, "line fit needs two equal samples of size >= 2");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  PREQINFO_CHECK(sxx > 0.0, InvalidArgument, "line fit undefined for constant x");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace preqinfo
