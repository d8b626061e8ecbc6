#pragma once

#include <cstddef>
#include <functional>

namespace bilip {

/// Number of workers used by parallel_for. Reads BILIP_THREADS, falling back
/// to the hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs;
/// results never depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bilip
