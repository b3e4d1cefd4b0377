#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace preqinfo {

double mean(std::span<const double> v);
double median(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> v);
double standard_error(std::span<const double> v);
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> ranks(std::span<const double> v);

/// Replicate summary: median with min/max over seeds.
struct Summary {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> values;

  double spread() const { return max - min; }
};

Summary summarize(std::span<const double> values);
nlohmann::json to_json(const Summary& s);

/// Least-squares slope and intercept of y on x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace preqinfo
