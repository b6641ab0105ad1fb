#pragma once

#include <thread>
#include <vector>

namespace shelab {

// Replica-parallel map with a fixed reduction order: results land in a vector
// indexed by replica, so aggregation does not depend on scheduling. Each
// replica derives its own RNG stream from its index; no state is shared.
template <typename F>
std::vector<double> replica_map(long replicas, int threads, F&& per_replica) {
    std::vector<double> out(static_cast<size_t>(replicas));
    if (threads < 1) threads = 1;
    if (threads == 1) {
        for (long r = 0; r < replicas; ++r) out[static_cast<size_t>(r)] = per_replica(r);
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (long r = w; r < replicas; r += threads)
                out[static_cast<size_t>(r)] = per_replica(r);
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

inline int default_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n ? static_cast<int>(n) : 1;
}

}  // namespace shelab
