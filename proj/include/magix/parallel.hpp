#pragma once

// Execution policy shared by the data-parallel kernels. Every kernel has a
// serial path that is the reference implementation; the OpenMP path must
// produce bit-identical results and is checked against it in the tests.

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace magix {

enum class Exec { Serial, Parallel };

struct ExecPolicy {
    Exec mode = Exec::Parallel;
    int workers = 0;  // 0: OpenMP default

    static ExecPolicy serial() { return {Exec::Serial, 1}; }
    static ExecPolicy parallel(int workers = 0) { return {Exec::Parallel, workers}; }

    int threads() const noexcept {
        if (mode == Exec::Serial) return 1;
#ifdef _OPENMP
        return workers > 0 ? workers : omp_get_max_threads();
#else
        return 1;
#endif
    }
};

/// Runs body(i) for i in [0, n). Iterations must be independent and write
/// only to slot i of their outputs.
template <typename Body>
void parallel_for(const ExecPolicy& exec, std::size_t n, Body&& body) {
    const int threads = exec.threads();
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
#ifdef _OPENMP
    const auto count = static_cast<long long>(n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
#else
    for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace magix
