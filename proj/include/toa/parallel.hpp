#pragma once

#include <cstddef>
#include <functional>

namespace toa {

// TOA_LAB_THREADS caps the worker count; unset or 0 means hardware concurrency.
std::size_t thread_count();

// Runs fn(i) for i in [0, n) on up to thread_count() threads, contiguous chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace toa
