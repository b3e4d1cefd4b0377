#include "preqinfo/jobs.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace preqinfo {

namespace {
std::atomic<std::size_t> g_default_jobs{0};
}

std::size_t resolve_jobs(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PREQINFO_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_default_jobs(std::size_t jobs) { g_default_jobs = jobs; }

std::size_t default_jobs() {
  const std::size_t j = g_default_jobs;
  return j > 0 ? j : resolve_jobs();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t jobs) {
  if (n == 0) return;
  const std::size_t workers = std::min(n, jobs > 0 ? jobs : default_jobs());
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace preqinfo
