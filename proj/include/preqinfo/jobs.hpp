#pragma once

#include <cstddef>
#include <functional>

namespace preqinfo {

/// Worker count: explicit value if > 0, else PREQINFO_JOBS, else hardware concurrency.
std::size_t resolve_jobs(std::size_t requested = 0);
void set_default_jobs(std::size_t jobs);
std::size_t default_jobs();

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception thrown by any
/// task is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t jobs = 0);

}  // namespace preqinfo
