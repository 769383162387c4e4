#pragma once

#include <cstddef>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace harmlab::par {

/// Global worker cap. 0 means "use all hardware threads"; 1 selects the
/// serial reference path (no OpenMP region at all).
void set_max_threads(int n);
int max_threads();
int effective_threads();

/// Deterministic parallel map: fn(i) may only write state owned by index i.
/// Results are independent of the worker count because every reduction in
/// this codebase happens afterwards, serially, in index order.
template <class F>
void map(std::size_t n, F&& fn) {
    if (effective_threads() <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        fn(static_cast<std::size_t>(i));
#else
    for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

/// Serial reference driver with the same contract as map(); kept separate so
/// tests and benchmarks can compare the two paths directly.
template <class F>
void map_serial(std::size_t n, F&& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

} // namespace harmlab::par
