#pragma once

#include <cstdint>
#include <functional>

namespace mriqc {

// Number of worker threads used by parallel_for. Defaults to the
// MRIQC_THREADS environment variable, else min(hardware, 4).
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, n). Tasks must write disjoint outputs; results are
// then independent of scheduling and thread count. Runs inline when n == 1
// or only one thread is configured.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace mriqc
