#pragma once

// Execution mode for the data-parallel kernels. Every kernel that takes an
// Exec argument has a plain serial path that is kept as the reference; the
// parallel path must produce bit-identical results (work is split by index,
// reductions happen in fixed order).

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hapfl {

enum class Exec { Serial, Parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline bool parallel_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace hapfl
