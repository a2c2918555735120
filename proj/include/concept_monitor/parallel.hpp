#pragma once

#include <cstddef>
#include <functional>

namespace concept_monitor {

/// Worker count used by parallel_for. Defaults to CONCEPT_MONITOR_THREADS if set,
/// otherwise the number of hardware threads.
[[nodiscard]] std::size_t thread_count() noexcept;
void set_thread_count(std::size_t n) noexcept;

/// Calls body(begin, end) on disjoint chunks covering [0, n). Chunks are aligned to
/// `grain` so work units never straddle threads. Exceptions from workers are rethrown.
/// Results must not depend on the chunking.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace concept_monitor
