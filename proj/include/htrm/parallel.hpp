#ifndef HTRM_PARALLEL_HPP
#define HTRM_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

namespace htrm {

inline unsigned default_workers() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(t) for t in [0, trials) on `workers` threads pulling from a shared
/// counter. Results are stored by trial index, so the output does not depend
/// on scheduling. If any trial throws, the exception of the lowest failing
/// trial index is rethrown after all workers stop.
template <class R, class F>
std::vector<R> run_trials(std::size_t trials, unsigned workers, F&& fn) {
    if (workers == 0) {
        workers = default_workers();
    }
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(trials, 1)));
    std::vector<std::optional<R>> slots(trials);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::size_t error_trial = trials;
    std::exception_ptr error;

    auto work = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t t = next.fetch_add(1);
            if (t >= trials) {
                return;
            }
            try {
                slots[t].emplace(fn(t));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (t < error_trial) {
                    error_trial = t;
                    error = std::current_exception();
                }
                failed = true;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    std::vector<R> out;
    out.reserve(trials);
    for (auto& s : slots) {
        out.push_back(std::move(*s));
    }
    return out;
}

/// Pairwise (tree) summation in index order.
template <class T>
T pairwise_sum(std::span<const T> v) {
    if (v.empty()) {
        return T{};
    }
    if (v.size() <= 8) {
        T s = v[0];
        for (std::size_t i = 1; i < v.size(); ++i) {
            s += v[i];
        }
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

} // namespace htrm

#endif
