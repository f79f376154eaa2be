#include "wlm/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace wlm {

std::size_t worker_count() {
    std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("WLM_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap > 0) workers = std::min(workers, static_cast<std::size_t>(cap));
        } catch (const std::exception&) {
            // Unparseable values leave the default in place.
        }
    }
    return workers;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
    work();
    for (auto& th : threads) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace wlm
