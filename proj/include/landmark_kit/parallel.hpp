#pragma once

#include <cstddef>
#include <functional>

namespace lmk {

/// Worker count: hardware concurrency, capped by LANDMARK_KIT_THREADS when set
/// to a positive integer. Always at least 1.
std::size_t thread_count();

/// Run `fn(i)` for i in [0, count) across up to thread_count() threads. Each
/// index runs exactly once; the exception of the lowest failing index is
/// rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace lmk
