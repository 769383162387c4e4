#include "harmlab/parallel.hpp"

#include <thread>

namespace harmlab::par {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

int max_threads() { return g_max_threads; }

int effective_threads() {
    if (g_max_threads > 0) return g_max_threads;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return static_cast<int>(std::thread::hardware_concurrency());
#endif
}

} // namespace harmlab::par
