#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dbrf {

/// Bad input data: unreadable files, malformed CSV, schema mismatches.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or argument values.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A structural invariant did not hold (corrupt model file, internal bug).
class InvariantError : public std::logic_error {
public:
    explicit InvariantError(const std::string& what) : std::logic_error(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic random numbers.
//
// All randomness in the library flows through SplitMix64 generators whose
// seeds are derived from user-supplied master seeds with mix64. The outputs
// are identical on every platform and under any thread count, which keeps
// trained models bit-reproducible.
// ---------------------------------------------------------------------------

constexpr std::uint64_t kGolden64 = 0x9e3779b97f4a7c15ull;

/// SplitMix64 finalizer: one well-mixed value per input.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += kGolden64;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Combine a seed with a stream index into a fresh seed.
constexpr std::uint64_t mix64(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream));
}

/// Small deterministic PRNG (SplitMix64). Period 2^64, passes BigCrush.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += kGolden64;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    /// Uniform integer in [0, n). Lemire's multiply-shift; n must be > 0.
    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by Rng (portable, unlike std::shuffle).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(v[i - 1], v[j]);
    }
}

// ---------------------------------------------------------------------------
// Parallel execution.
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<unsigned>& thread_cap_storage() {
    static std::atomic<unsigned> cap{0};  // 0 = hardware concurrency
    return cap;
}
}  // namespace detail

/// Cap worker threads globally (0 restores the hardware default).
inline void set_max_threads(unsigned n) { detail::thread_cap_storage().store(n); }

inline unsigned max_threads() {
    unsigned cap = detail::thread_cap_storage().load();
    if (cap == 0) {
        if (const char* env = std::getenv("DBRF_THREADS")) {
            long v = std::strtol(env, nullptr, 10);
            if (v > 0) cap = static_cast<unsigned>(v);
        }
    }
    if (cap == 0) cap = std::thread::hardware_concurrency();
    return cap == 0 ? 1u : cap;
}

/// Run fn(i) for i in [0, n). Each index owns its output slot, so results do
/// not depend on the schedule or the number of workers. Exceptions from
/// workers are rethrown on the calling thread.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         std::size_t grain = 1) {
    if (n == 0) return;
    unsigned workers = max_threads();
    if (workers <= 1 || n <= grain) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (grain == 0) grain = 1;
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            std::size_t begin = cursor.fetch_add(grain);
            if (begin >= n || failed.load(std::memory_order_relaxed)) return;
            std::size_t end = std::min(n, begin + grain);
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    unsigned spawn = static_cast<unsigned>(
        std::min<std::size_t>(workers, (n + grain - 1) / grain));
    pool.reserve(spawn - 1);
    for (unsigned t = 1; t < spawn; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failed.load()) std::rethrow_exception(error);
}

}  // namespace dbrf
