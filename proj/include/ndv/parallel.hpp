#pragma once

#include <cstdint>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ndv {

// Runs body(i) for i in [0, count). With threads <= 1 (or without OpenMP)
// this is a plain serial loop; otherwise iterations are distributed across
// an OpenMP team. Bodies must write only to per-index slots so that the
// serial and parallel paths produce bitwise-identical results.
template <typename Body>
void parallel_for(std::int64_t count, int threads, Body&& body) {
    if (count < 0) throw std::invalid_argument("parallel_for: negative count");
#ifdef _OPENMP
    if (threads > 1) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
        for (std::int64_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
#else
    (void)threads;
#endif
    for (std::int64_t i = 0; i < count; ++i) {
        body(i);
    }
}

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace ndv
