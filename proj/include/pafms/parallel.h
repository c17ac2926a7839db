#ifndef PAFMS_PARALLEL_H
#define PAFMS_PARALLEL_H

#include <cstddef>
#include <functional>

namespace pafms
{

/// Worker count: hardware concurrency, capped by the PAF_MSM_THREADS
/// environment variable when it holds a positive integer.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
/// visited exactly once; if any call throws, the exception of the lowest
/// failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace pafms

#endif
