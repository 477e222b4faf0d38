#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace qma {

/// Worker count for node-parallel loops. QMA_THREADS overrides the hardware default.
inline int thread_count() {
    static const int count = [] {
        if (const char* env = std::getenv("QMA_THREADS")) {
            try {
                const int t = std::stoi(env);
                if (t >= 1) return t;
            } catch (...) {
            }
        }
        return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    }();
    return count;
}

/// Calls f(begin, end) on disjoint contiguous chunks of [0, n). Each index is
/// visited exactly once, so per-index writes are race free and deterministic.
template <typename F>
void parallel_chunks(std::size_t n, F&& f) {
    const auto threads = static_cast<std::size_t>(thread_count());
    if (threads <= 1 || n < 4096) {
        f(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&f, b, e] { f(b, e); });
    }
    for (auto& th : pool) th.join();
}

template <typename F>
void parallel_for(std::size_t n, F&& f) {
    parallel_chunks(n, [&f](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) f(i);
    });
}

/// Neumaier-compensated sum in a fixed order.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace qma
