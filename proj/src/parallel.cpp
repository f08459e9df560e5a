#include "picert/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace picert {

namespace {

int read_thread_env() {
  const char* raw = std::getenv("PI_CERTIFY_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    const int n = std::stoi(raw);
    return n > 0 ? n : 0;
  } catch (...) {
    return 0;
  }
}

}  // namespace

int configured_threads() {
  static const int n = read_thread_env();
  return n;
}

ExecMode default_exec_mode() {
  return configured_threads() == 1 ? ExecMode::Serial : ExecMode::Parallel;
}

void apply_thread_config() {
#ifdef _OPENMP
  const int n = configured_threads();
  if (n > 0) omp_set_num_threads(n);
#endif
}

}  // namespace picert
