#include "hmor/parallel.hpp"

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hmor {

int thread_cap() {
#ifdef _OPENMP
  if (const char* env = std::getenv("HMOR_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace hmor
