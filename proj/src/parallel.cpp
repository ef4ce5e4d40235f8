#include "eqstop/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eqstop {

int worker_count() {
    long requested = 0;
    if (const char* env = std::getenv("EQSTOP_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 0) requested = v;
    }
#ifdef _OPENMP
    int avail = omp_get_max_threads();
#else
    int avail = 1;
#endif
    if (requested == 0) return avail;
    return static_cast<int>(requested < avail ? requested : avail);
}

} // namespace eqstop
