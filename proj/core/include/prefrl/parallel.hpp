#pragma once

#include <cstddef>
#include <functional>

namespace prefrl {

// Worker cap: PREFRL_THREADS if set (clamped to >= 1), else hardware
// concurrency. Callers must make body(i) independent of scheduling; every
// parallel site in this project derives per-index RNG streams and writes
// per-index slots, so results do not depend on the worker count.
std::size_t thread_cap();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace prefrl
