#pragma once

#include <cstddef>
#include <functional>

namespace weakvar {

/// Worker count: hardware concurrency, capped by WEAKVAR_THREADS when set.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is visited exactly once.
void parallel_for(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace weakvar
