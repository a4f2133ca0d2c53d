#pragma once

#include <functional>

namespace rectiwarp {

// Worker count: RECTIWARP_THREADS when set to a positive integer, else the
// hardware concurrency (at least 1).
int thread_budget();

// Runs fn(begin_row, end_row) over a deterministic partition of [0, rows).
// Results must not depend on execution order; the partition itself is a
// pure function of rows and the thread budget.
void parallel_rows(int rows, const std::function<void(int, int)> &fn);

} // namespace rectiwarp
