#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace santa {

// Selects the serial reference loop or the OpenMP loop for per-item work.
// Both produce identical results; aggregation always happens serially in
// item order.
enum class Exec { serial, parallel };

// Runs fn(i) for i in [0, n). The first exception (lowest index) is rethrown
// after the loop.
template <class Fn>
void for_each_index(std::size_t n, Exec exec, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long>(n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (long i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace santa
