#include "binquant/threading.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace binquant {

static int read_worker_count() {
  const char* env = std::getenv("BINQUANT_THREADS");
  if (env != nullptr) {
    try {
      long v = std::stol(env);
      if (v <= 0) return 1;
      return static_cast<int>(v);
    } catch (...) {
      return 1;
    }
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int worker_count() {
  static const int n = read_worker_count();
  return n;
}

}  // namespace binquant
