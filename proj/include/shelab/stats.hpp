#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

namespace shelab {

// Monte Carlo estimate with provenance. stderr = sample sd / sqrt(replicas).
// ess is the effective sample size (sum w)^2 / sum w^2 of the per-replica
// contributions; it equals `replicas` for unweighted estimands.
struct MomentEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    long replicas = 0;
    uint64_t seed = 0;
    double ess = 0.0;
};

inline MomentEstimate estimate_from_samples(std::span<const double> x, uint64_t seed) {
    MomentEstimate e;
    e.replicas = static_cast<long>(x.size());
    e.seed = seed;
    if (x.empty()) return e;
    double s = 0.0;
    for (double v : x) s += v;
    e.mean = s / static_cast<double>(x.size());
    double ss = 0.0, s2 = 0.0;
    for (double v : x) {
        double d = v - e.mean;
        ss += d * d;
        s2 += v * v;
    }
    if (x.size() > 1)
        e.stderr_ = std::sqrt(ss / (static_cast<double>(x.size()) - 1.0) /
                              static_cast<double>(x.size()));
    e.ess = (s2 > 0.0) ? s * s / s2 : 0.0;
    return e;
}

// two-sample z statistic; stderr 0 on either side is allowed (exact reference)
inline double z_stat(const MomentEstimate& a, const MomentEstimate& b) {
    double se = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
    if (se == 0.0) return (a.mean == b.mean) ? 0.0 : INFINITY;
    return (a.mean - b.mean) / se;
}

inline double z_against(const MomentEstimate& a, double target) {
    if (a.stderr_ == 0.0) return (a.mean == target) ? 0.0 : INFINITY;
    return (a.mean - target) / a.stderr_;
}

inline double combined_stderr(const MomentEstimate& a, const MomentEstimate& b) {
    return std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
}

// standard normal CDF
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct Welford {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_() const {
        return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
    }
};

}  // namespace shelab
