#pragma once

#include <cstddef>
#include <functional>

namespace lnforge {

/// Worker count: LNFORGE_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) over static contiguous chunks. Callers keep
/// results bitwise reproducible by writing per-index outputs and reducing
/// them afterwards in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lnforge
