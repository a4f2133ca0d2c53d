#include "rectiwarp/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace rectiwarp {

int thread_budget() {
    if (const char *env = std::getenv("RECTIWARP_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception &) {
            // fall through to the hardware default
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_rows(int rows, const std::function<void(int, int)> &fn) {
    if (rows <= 0) return;
    const int workers = std::min(thread_budget(), rows);
    if (workers <= 1) {
        fn(0, rows);
        return;
    }
    // Fixed block partition: worker i handles [i*q + min(i,r), ...), where
    // q = rows/workers and r = rows%workers, independent of scheduling.
    const int q = rows / workers;
    const int r = rows % workers;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    int begin = 0;
    for (int i = 0; i < workers; ++i) {
        const int len = q + (i < r ? 1 : 0);
        const int end = begin + len;
        threads.emplace_back([&fn, begin, end] { fn(begin, end); });
        begin = end;
    }
    for (std::thread &t : threads) t.join();
}

} // namespace rectiwarp
