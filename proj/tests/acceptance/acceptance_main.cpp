// One PASS/FAIL line per criterion; a non-zero exit means the run itself broke.
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "preqinfo/acceptance.hpp"

int main(int argc, char** argv) {
  preqinfo::AcceptanceOptions options;
  for (int i = 1; i < argc; ++i) options.only.push_back(std::atoi(argv[i]));
  options.on_result = [](const preqinfo::CriterionResult& r) {
    std::cout << preqinfo::format_result_line(r) << std::endl;
  };
  try {
    const auto results = preqinfo::run_acceptance(options);
    std::cout << "\n" << preqinfo::format_summary_table(results);
    return results.size() == (options.only.empty() ? preqinfo::kCriterionCount : options.only.size()) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
}
