#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace preqinfo {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string measured;   // human-readable, with units
  std::string threshold;  // human-readable, with units
  double seconds = 0.0;
  nlohmann::json detail = nlohmann::json::object();
};

struct AcceptanceOptions {
  std::vector<int> only;  // empty: all fourteen
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::function<void(const CriterionResult&)> on_result;
};

inline constexpr int kCriterionCount = 14;

/// Runs the bundled acceptance suite; results come back in criterion order.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options = {});

/// "PASS  5  name  measured  (threshold)"
std::string format_result_line(const CriterionResult& r);
std::string format_summary_table(const std::vector<CriterionResult>& results);
nlohmann::json to_json(const CriterionResult& r);

}  // namespace preqinfo
