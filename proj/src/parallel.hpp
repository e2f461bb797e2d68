#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace scenefield::detail {

/// Runs fn(begin, end) over contiguous chunks of [0, n) on up to hardware_concurrency threads.
/// Chunks write disjoint outputs, so results do not depend on the thread count.
template <typename Fn>
void parallel_for(long n, Fn&& fn) {
  const long threads = std::clamp<long>(std::thread::hardware_concurrency(), 1, 64);
  if (threads == 1 || n < 256) {
    fn(0L, n);
    return;
  }
  const long chunk = (n + threads - 1) / threads;
  std::vector<std::jthread> pool;
  for (long begin = 0; begin < n; begin += chunk) {
    pool.emplace_back([&fn, begin, end = std::min(n, begin + chunk)] { fn(begin, end); });
  }
}

}  // namespace scenefield::detail
