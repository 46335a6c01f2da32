#pragma once

#include <cstddef>

#include "chaoslab/diagnostics.hpp"

namespace chaoslab::cli {

// Runs jobs on `workers` threads pulling indices from a shared counter; the
// first exception thrown by a job is rethrown after all threads join.
Executor thread_pool_executor(std::size_t workers);

}  // namespace chaoslab::cli
