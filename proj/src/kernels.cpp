// Lane dispatch and the fork-join pool behind parallel_for.

#include "spikenas/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "spikenas/error.hpp"

namespace spikenas::kern {

namespace {

// Feature-map buffers are a few hundred KB and are allocated and freed on
// every forward pass; keep them on the heap instead of bouncing through
// mmap/munmap.
struct MallocTuning {
    MallocTuning() {
#if defined(__GLIBC__)
        mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 128 * 1024 * 1024);
#endif
    }
};
const MallocTuning g_malloc_tuning;

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Lane detect_lane() { return cpu_has_avx2() ? Lane::avx2 : Lane::scalar; }

Lane g_lane = detect_lane();

template <class T>
Table<T> make_table(Lane lane) {
    return lane == Lane::avx2 ? detail::avx2_table<T>() : detail::scalar_table<T>();
}

Table<float> g_table_f = make_table<float>(g_lane);
Table<double> g_table_d = make_table<double>(g_lane);

int default_threads() {
    if (const char* env = std::getenv("SPIKENAS_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return std::min(v, 64);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(std::min(hw, 64u));
}

int g_threads = default_threads();

// Minimal fork-join pool. Workers pull closures from a queue; parallel_for
// blocks until its chunks complete. A worker never spawns nested parallel
// work (nested calls run inline), so the pool cannot deadlock.
class Pool {
public:
    static Pool& instance() {
        static Pool p;
        return p;
    }

    void run_chunks(std::int64_t n, int chunks,
                    const std::function<void(std::int64_t, std::int64_t)>& body) {
        ensure_workers(chunks - 1);
        std::atomic<int> remaining(chunks - 1);
        std::int64_t chunk = (n + chunks - 1) / chunks;
        {
            std::lock_guard<std::mutex> lk(mu_);
            for (int c = 1; c < chunks; ++c) {
                std::int64_t b = std::min<std::int64_t>(std::int64_t(c) * chunk, n);
                std::int64_t e = std::min<std::int64_t>(b + chunk, n);
                queue_.emplace_back([&, b, e] {
                    if (b < e) body(b, e);
                    if (remaining.fetch_sub(1) == 1) {
                        std::lock_guard<std::mutex> dk(done_mu_);
                        done_cv_.notify_all();
                    }
                });
            }
        }
        cv_.notify_all();
        body(0, std::min<std::int64_t>(chunk, n));
        std::unique_lock<std::mutex> dk(done_mu_);
        done_cv_.wait(dk, [&] { return remaining.load() == 0; });
    }

    static thread_local bool in_worker;

private:
    Pool() = default;
    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    void ensure_workers(int count) {
        std::lock_guard<std::mutex> lk(mu_);
        while (int(workers_.size()) < count) {
            workers_.emplace_back([this] {
                in_worker = true;
                for (;;) {
                    std::function<void()> job;
                    {
                        std::unique_lock<std::mutex> lk2(mu_);
                        cv_.wait(lk2, [this] { return stop_ || !queue_.empty(); });
                        if (stop_ && queue_.empty()) return;
                        job = std::move(queue_.front());
                        queue_.pop_front();
                    }
                    job();
                }
            });
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::mutex done_mu_;
    std::condition_variable done_cv_;
    std::deque<std::function<void()>> queue_;
    std::vector<std::thread> workers_;
    bool stop_ = false;
};

thread_local bool Pool::in_worker = false;

}  // namespace

const char* lane_name(Lane lane) { return lane == Lane::avx2 ? "avx2" : "scalar"; }

bool lane_available(Lane lane) { return lane == Lane::scalar || cpu_has_avx2(); }

Lane active_lane() { return g_lane; }

void set_lane(Lane lane) {
    if (!lane_available(lane))
        throw ConfigError(std::string("SIMD lane not available on this CPU: ") + lane_name(lane));
    g_lane = lane;
    g_table_f = make_table<float>(lane);
    g_table_d = make_table<double>(lane);
}

int thread_count() { return g_threads; }

void set_thread_count(int n) { g_threads = std::max(1, std::min(n, 64)); }

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (n <= 0) return;
    int chunks = int(std::min<std::int64_t>(g_threads, n));
    if (chunks <= 1 || Pool::in_worker) {
        body(0, n);
        return;
    }
    Pool::instance().run_chunks(n, chunks, body);
}

template <>
const Table<float>& table<float>() {
    return g_table_f;
}

template <>
const Table<double>& table<double>() {
    return g_table_d;
}

}  // namespace spikenas::kern
