#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace shelab {

// splitmix64, used only to turn (seed, stream ids) into well-mixed engine seeds
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(mix64(a) ^ b); }
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) { return mix64(mix64(a, b) ^ c); }

// Gaussian stream on top of mt19937_64. std::normal_distribution is
// implementation-defined, so Box-Muller is spelled out here; identical seeds
// give bit-identical streams for a given build.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // replica/stream derivation: (master_seed, stream_id[, sub_id])
    static Rng stream(uint64_t master, uint64_t a, uint64_t b = 0) {
        return Rng(mix64(master, a, b));
    }

    // uniform on (0, 1]
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = uniform();
        double v = uniform();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace shelab
