#pragma once

#include <cstddef>
#include <functional>

namespace wignerdyn {

/// Worker count used by parallel_for; 0 selects hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/**
 * Runs task(k) for k in [0, n_tasks) on the worker pool.
 *
 * Tasks are claimed dynamically, so callers that need reproducible
 * reductions must write each task's result into slot k and combine the
 * slots in index order afterwards.  The first exception thrown by a task
 * is rethrown on the calling thread.
 */
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& task);

}  // namespace wignerdyn
