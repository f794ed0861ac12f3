#pragma once

#include <cstddef>
#include <functional>

namespace stemalign {

/// Global worker-thread bound. Defaults to the hardware concurrency;
/// the CLI sets it from --threads.
int max_threads();
void set_max_threads(int n);

/// Run f(i) for i in [0, n) over static contiguous ranges.
///
/// Each item must write only to its own output slot; reductions happen
/// sequentially afterwards. Under that discipline results are bit-identical
/// for any thread count, which the determinism contract relies on.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

/// Static-range variant: f(begin, end) per worker, for loops where per-item
/// dispatch overhead matters.
void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& f);

}  // namespace stemalign
