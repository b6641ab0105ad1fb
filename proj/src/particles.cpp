#include "shelab/particles.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "shelab/parallel.hpp"
#include "shelab/quadrature.hpp"
#include "shelab/rng.hpp"

namespace shelab {

namespace {

constexpr uint64_t kOracleBm = 0x626d6c74ull;       // bm local time
constexpr uint64_t kOraclePhiExp = 0x70686965ull;   // pre-Girsanov exponent
constexpr uint64_t kOracleDiff = 0x64696666ull;     // Diff(eps)
constexpr uint64_t kOracleSing = 0x73696e67ull;     // Sing(eps)
constexpr uint64_t kOracleGirs = 0x67697273ull;     // Girsanov
constexpr uint64_t kOracleProbe = 0x70726f62ull;

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

long steps_for(double t, double dt_p) {
    long k = std::lround(t / dt_p);
    return k > 0 ? k : 1;
}

// cyclic Jacobi for symmetric n x n (n <= 4); a row-major input, destroyed;
// q gets eigenvectors in columns
void sym_eigen(int n, double* a, double* q, double* lam) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) q[i * n + j] = (i == j) ? 1.0 : 0.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p)
            for (int r = p + 1; r < n; ++r) {
                double apr = a[p * n + r];
                if (std::abs(apr) < 1e-300) continue;
                double theta = 0.5 * (a[r * n + r] - a[p * n + p]) / apr;
                double t = sgn(theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta == 0.0) t = 1.0;
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a[k * n + p], akr = a[k * n + r];
                    a[k * n + p] = c * akp - s * akr;
                    a[k * n + r] = s * akp + c * akr;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a[p * n + k], ark = a[r * n + k];
                    a[p * n + k] = c * apk - s * ark;
                    a[r * n + k] = s * apk + c * ark;
                }
                for (int k = 0; k < n; ++k) {
                    double qkp = q[k * n + p], qkr = q[k * n + r];
                    q[k * n + p] = c * qkp - s * qkr;
                    q[k * n + r] = s * qkp + c * qkr;
                }
            }
    }
    for (int i = 0; i < n; ++i) lam[i] = a[i * n + i];
}

struct PairIndex {
    int n;
    int count() const { return n * (n - 1) / 2; }
    int operator()(int i, int j) const {  // i < j
        return i * n - i * (i + 1) / 2 + (j - i - 1);
    }
};

double product_psi(const TestFn& psi, std::span<const double> x) {
    double p = 1.0;
    for (double v : x) p *= psi(v);
    return p;
}

}  // namespace

double local_time_tanaka(std::span<const double> path) {
    if (path.size() < 2) return 0.0;
    double acc = 0.0;
    for (size_t k = 0; k + 1 < path.size(); ++k)
        acc += sgn(path[k]) * (path[k + 1] - path[k]);
    return std::abs(path.back()) - std::abs(path.front()) - acc;
}

MomentEstimate bm_local_time_moment(int n, std::span<const double> x0, double t,
                                    double gamma, const TestFn& psi, double dt_p,
                                    long replicas, uint64_t seed, int threads,
                                    LocalTimeEstimator est, double band_delta) {
    if (n < 1 || n > kMaxParticles)
        throw ConfigurationError("bm_local_time_moment: n out of range");
    const long n_steps = steps_for(t, dt_p);
    const double dt = t / static_cast<double>(n_steps);
    const double sq_dt = std::sqrt(dt);
    const double delta = band_delta > 0.0 ? band_delta : 3.0 * sq_dt;
    const PairIndex pairs{n};

    auto samples = replica_map(replicas, threads, [&](long r) {
        Rng rng = Rng::stream(seed, kOracleBm, static_cast<uint64_t>(r));
        std::array<double, kMaxParticles> x{};
        for (int i = 0; i < n; ++i) x[i] = x0[i];
        std::array<double, 6> lt{};
        for (long k = 0; k < n_steps; ++k) {
            std::array<double, kMaxParticles> dw{};
            for (int i = 0; i < n; ++i) dw[i] = sq_dt * rng.gaussian();
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double y_old = x[i] - x[j];
                    double y_new = y_old + dw[i] - dw[j];
                    if (est == LocalTimeEstimator::tanaka) {
                        lt[pairs(i, j)] +=
                            std::abs(y_new) - std::abs(y_old) - sgn(y_old) * (y_new - y_old);
                    } else {
                        if (std::abs(y_old) < delta)
                            lt[pairs(i, j)] += dt / (2.0 * delta);
                    }
                }
            for (int i = 0; i < n; ++i) x[i] += dw[i];
        }
        double s = 0.0;
        for (int q = 0; q < pairs.count(); ++q) s += lt[q];
        return std::exp(gamma * s) * product_psi(psi, {x.data(), (size_t)n});
    });
    return estimate_from_samples(samples, seed);
}

double pair_mass_moment_quadrature(double sigma, double t) {
    // occupation density of B^1 - B^2 at 0 equals |Z| sqrt(t/2) in law
    const double a = sigma * sigma * std::sqrt(t / 2.0);
    return simpson_refine(
        [&](double z) {
            return 2.0 * std::exp(a * z) * std::exp(-0.5 * z * z) /
                   std::sqrt(2.0 * 3.141592653589793238462643383279502884);
        },
        0.0, 40.0, 1e-12, 1e-15, 1024);
}

double pair_mass_moment_closed_form(double sigma, double t) {
    double s2 = sigma * sigma;
    return 2.0 * std::exp(s2 * s2 * t / 4.0) * normal_cdf(s2 * std::sqrt(t / 2.0));
}

MomentEstimate bm_phi_exponent_moment(int n, std::span<const double> x0, double t,
                                      double eps, int p, const Mollifier& phi,
                                      const TestFn& psi, double dt_p, long replicas,
                                      uint64_t seed, int threads) {
    if (n < 1 || n > kMaxParticles)
        throw ConfigurationError("bm_phi_exponent_moment: n out of range");
    const double w = phi.width();
    const double h = w / 256.0;
    const SampledKernel b2p = self_convolve(phi, 1.0, 2 * p, h);
    const double amp = ((p % 2) ? -1.0 : 1.0) * std::pow(eps, -1.5);
    const double inv_eps = 1.0 / eps;

    const long n_steps = steps_for(t, dt_p);
    const double dt = t / static_cast<double>(n_steps);
    const double sq_dt = std::sqrt(dt);
    const PairIndex pairs{n};

    auto samples = replica_map(replicas, threads, [&](long r) {
        Rng rng = Rng::stream(seed, kOraclePhiExp, static_cast<uint64_t>(r));
        std::array<double, kMaxParticles> x{};
        for (int i = 0; i < n; ++i) x[i] = x0[i];
        std::array<double, 6> acc{};
        for (long k = 0; k < n_steps; ++k) {
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    acc[pairs(i, j)] += amp * b2p.eval((x[i] - x[j]) * inv_eps) * dt;
            for (int i = 0; i < n; ++i) x[i] += sq_dt * rng.gaussian();
        }
        double s = 0.0;
        for (int q = 0; q < pairs.count(); ++q) s += acc[q];
        return std::exp(s) * product_psi(psi, {x.data(), (size_t)n});
    });
    return estimate_from_samples(samples, seed);
}

MomentEstimate diff_eps_moment(int n, std::span<const double> x0, double t, double eps,
                               int p, const Mollifier& phi, const TestFn& psi,
                               double dt_p, long replicas, uint64_t seed, int threads) {
    if (n < 1 || n > kMaxParticles)
        throw ConfigurationError("diff_eps_moment: n out of range");
    const double w = phi.width();
    const double h = w / 256.0;
    const SampledKernel b_odd = self_convolve(phi, 1.0, 2 * p - 1, h);
    const SampledKernel b_even = self_convolve(phi, 1.0, 2 * p - 2, h);
    const double sign_p = (p % 2) ? -1.0 : 1.0;
    const double inv_eps = 1.0 / eps;
    const double drift_amp = -sign_p / std::sqrt(eps);  // per-summand coefficient
    const double quad_amp = 1.0 / eps;                  // on B_odd(u)^2 and products
    const double end_amp = sign_p * std::sqrt(eps);

    const long n_steps = steps_for(t, dt_p);
    const double dt = t / static_cast<double>(n_steps);
    const double sq_dt = std::sqrt(dt);
    const PairIndex pairs{n};

    auto samples = replica_map(replicas, threads, [&](long r) {
        Rng rng = Rng::stream(seed, kOracleDiff, static_cast<uint64_t>(r));
        std::array<double, kMaxParticles> x{};
        for (int i = 0; i < n; ++i) x[i] = x0[i];
        double exponent = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                exponent -= end_amp * b_even.eval((x[i] - x[j]) * inv_eps);

        std::array<double, kMaxParticles * kMaxParticles> g{};  // B_odd((x_i-x_j)/eps)
        for (long k = 0; k < n_steps; ++k) {
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double v = b_odd.eval((x[i] - x[j]) * inv_eps);
                    g[i * n + j] = v;
                    g[j * n + i] = -v;  // odd kernel
                }
            // squared-kernel exponent and triple-intersection accumulator
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    exponent += quad_amp * g[i * n + j] * g[i * n + j] * dt;
            if (n >= 3) {
                for (int i = 0; i < n; ++i)
                    for (int j1 = 0; j1 < n; ++j1) {
                        if (j1 == i) continue;
                        for (int j2 = j1 + 1; j2 < n; ++j2) {
                            if (j2 == i) continue;
                            exponent += quad_amp * g[i * n + j1] * g[i * n + j2] * dt;
                        }
                    }
            }
            for (int i = 0; i < n; ++i) {
                double b = 0.0;
                for (int j = 0; j < n; ++j)
                    if (j != i) b += g[i * n + j];
                x[i] += drift_amp * b * dt + sq_dt * rng.gaussian();
            }
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                exponent += end_amp * b_even.eval((x[i] - x[j]) * inv_eps);
        return std::exp(exponent) * product_psi(psi, {x.data(), (size_t)n});
    });
    return estimate_from_samples(samples, seed);
}

// ---- Cen / Sing ------------------------------------------------------------

CenStepper::CenStepper(int n, double eps, double theta, const SampledKernel* phi_conv)
    : n_(n), eps_(eps), theta_(theta), phi_conv_(phi_conv) {
    if (n_ < 1 || n_ > kMaxParticles)
        throw ConfigurationError("CenStepper: n out of range");
}

double CenStepper::pair_potential(double d) const {
    return phi_conv_->eval(d / eps_) / eps_;
}

void CenStepper::factorize(std::span<const double> y) {
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
            double v = eps_ * pair_potential(y[i] - y[j]);
            if (i == j) v += theta_;
            a_[i * n_ + j] = v;
        }
    sym_eigen(n_, a_.data(), q_.data(), lam_.data());
    double lam_max = 0.0;
    for (int i = 0; i < n_; ++i) lam_max = std::max(lam_max, lam_[i]);
    for (int i = 0; i < n_; ++i) {
        if (lam_[i] < -1e-10 * lam_max) {
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "CenStepper: covariance not PSD (lambda=%.3e) at y=(%.6f %.6f "
                          "%.6f %.6f)",
                          lam_[i], y[0], n_ > 1 ? y[1] : 0.0, n_ > 2 ? y[2] : 0.0,
                          n_ > 3 ? y[3] : 0.0);
            throw std::runtime_error(buf);
        }
        if (lam_[i] < 0.0) lam_[i] = 0.0;
    }
}

void CenStepper::step(std::span<double> y, std::span<const double> z, double dt,
                      std::span<double> dy) {
    factorize(y);
    const double sq_dt = std::sqrt(dt);
    std::array<double, kMaxParticles> u{};
    // u = diag(sqrt(lam)) Q^T z
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int k = 0; k < n_; ++k) s += q_[k * n_ + i] * z[k];
        u[i] = std::sqrt(lam_[i]) * s;
    }
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int k = 0; k < n_; ++k) s += q_[i * n_ + k] * u[k];
        dy[i] = sq_dt * s;
        y[i] += dy[i];
    }
}

void CenStepper::sing_drift(std::span<const double> y, std::span<double> b) const {
    const double amp = std::sqrt(eps_);
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int j = 0; j < n_; ++j)
            if (j != i) s += pair_potential(y[i] - y[j]);
        b[i] = amp * s;
    }
}

void CenStepper::solve_from_factorization(std::span<const double> b,
                                          std::span<double> lambda) const {
    std::array<double, kMaxParticles> u{};
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int k = 0; k < n_; ++k) s += q_[k * n_ + i] * b[k];
        if (lam_[i] <= 0.0)
            throw std::runtime_error("CenStepper: singular covariance in solve");
        u[i] = s / lam_[i];
    }
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int k = 0; k < n_; ++k) s += q_[i * n_ + k] * u[k];
        lambda[i] = s;
    }
}

MomentEstimate sing_eps_moment(int n, std::span<const double> x0, double t, double eps,
                               const Mollifier& phi, const TestFn& psi, double dt_p,
                               long replicas, uint64_t seed, int threads) {
    if (n < 1 || n > kMaxParticles)
        throw ConfigurationError("sing_eps_moment: n out of range");
    const SampledKernel conv = self_convolve(phi, 1.0, 0, phi.width() / 256.0);
    const double theta = 1.0 - phi.l2_norm_sq();
    if (theta <= 0.0) throw ValidationError("sing_eps_moment: ||phi||^2 >= 1");

    const long n_steps = steps_for(t, dt_p);
    const double dt = t / static_cast<double>(n_steps);
    const PairIndex pairs{n};

    auto samples = replica_map(replicas, threads, [&](long r) {
        Rng rng = Rng::stream(seed, kOracleSing, static_cast<uint64_t>(r));
        CenStepper stepper(n, eps, theta, &conv);
        std::array<double, kMaxParticles> x{}, z{}, dy{}, b{};
        for (int i = 0; i < n; ++i) x[i] = x0[i];
        double exponent = 0.0;
        for (long k = 0; k < n_steps; ++k) {
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    exponent += stepper.pair_potential(x[i] - x[j]) * dt;
            stepper.sing_drift({x.data(), (size_t)n}, {b.data(), (size_t)n});
            for (int i = 0; i < n; ++i) z[i] = rng.gaussian();
            stepper.step({x.data(), (size_t)n}, {z.data(), (size_t)n}, dt,
                         {dy.data(), (size_t)n});
            for (int i = 0; i < n; ++i) x[i] += b[i] * dt;
        }
        (void)pairs;
        return std::exp(exponent) * product_psi(psi, {x.data(), (size_t)n});
    });
    return estimate_from_samples(samples, seed);
}

MomentEstimate girsanov_reweighted_moment(int n, std::span<const double> x0, double t,
                                          double eps, const Mollifier& phi,
                                          GirsanovFunctional functional,
                                          const TestFn& psi, double dt_p,
                                          long replicas, uint64_t seed, int threads) {
    if (n < 1 || n > kMaxParticles)
        throw ConfigurationError("girsanov_reweighted_moment: n out of range");
    const SampledKernel conv = self_convolve(phi, 1.0, 0, phi.width() / 256.0);
    const double theta = 1.0 - phi.l2_norm_sq();
    if (theta <= 0.0) throw ValidationError("girsanov_reweighted_moment: ||phi||^2 >= 1");

    const long n_steps = steps_for(t, dt_p);
    const double dt = t / static_cast<double>(n_steps);

    auto samples = replica_map(replicas, threads, [&](long r) {
        Rng rng = Rng::stream(seed, kOracleGirs, static_cast<uint64_t>(r));
        CenStepper stepper(n, eps, theta, &conv);
        std::array<double, kMaxParticles> x{}, z{}, dy{}, b{}, lam{};
        for (int i = 0; i < n; ++i) x[i] = x0[i];
        double d_acc = 0.0, qv_acc = 0.0, exponent = 0.0;
        for (long k = 0; k < n_steps; ++k) {
            if (functional == GirsanovFunctional::pair_exponent_psi) {
                for (int i = 0; i < n; ++i)
                    for (int j = i + 1; j < n; ++j)
                        exponent += stepper.pair_potential(x[i] - x[j]) * dt;
            }
            stepper.sing_drift({x.data(), (size_t)n}, {b.data(), (size_t)n});
            for (int i = 0; i < n; ++i) z[i] = rng.gaussian();
            stepper.step({x.data(), (size_t)n}, {z.data(), (size_t)n}, dt,
                         {dy.data(), (size_t)n});
            stepper.solve_from_factorization({b.data(), (size_t)n},
                                             {lam.data(), (size_t)n});
            for (int i = 0; i < n; ++i) {
                d_acc += lam[i] * dy[i];
                qv_acc += lam[i] * b[i] * dt;
            }
        }
        double weight = std::exp(d_acc - 0.5 * qv_acc);
        switch (functional) {
            case GirsanovFunctional::unit:
                return weight;
            case GirsanovFunctional::psi_first_coordinate:
                return weight * psi(x[0]);
            case GirsanovFunctional::pair_exponent_psi:
                return weight * std::exp(exponent) *
                       product_psi(psi, {x.data(), (size_t)n});
        }
        return weight;
    });
    return estimate_from_samples(samples, seed);
}

RescaleCouplingResult rescale_coupling_check(int n, std::span<const double> x0,
                                             double t, double eps,
                                             const Mollifier& phi, double dt1,
                                             uint64_t seed) {
    if (n < 1 || n > kMaxParticles)
        throw ConfigurationError("rescale_coupling_check: n out of range");
    const SampledKernel conv = self_convolve(phi, 1.0, 0, phi.width() / 256.0);
    const double theta = 1.0 - phi.l2_norm_sq();
    const double dt_eps = eps * eps * dt1;
    const long n_steps = steps_for(t, dt_eps);

    CenStepper fine(n, eps, theta, &conv);
    CenStepper unit(n, 1.0, theta, &conv);
    std::array<double, kMaxParticles> xe{}, x1{}, z{}, dy{};
    for (int i = 0; i < n; ++i) {
        xe[i] = eps * x0[i];
        x1[i] = x0[i];
    }
    Rng rng = Rng::stream(seed, kOracleProbe, 0x7265736332ull);

    RescaleCouplingResult out;
    for (long k = 0; k < n_steps; ++k) {
        for (int i = 0; i < n; ++i) z[i] = rng.gaussian();
        fine.step({xe.data(), (size_t)n}, {z.data(), (size_t)n}, dt_eps,
                  {dy.data(), (size_t)n});
        unit.step({x1.data(), (size_t)n}, {z.data(), (size_t)n}, dt1,
                  {dy.data(), (size_t)n});
        for (int i = 0; i < n; ++i) {
            out.max_discrepancy =
                std::max(out.max_discrepancy, std::abs(xe[i] - eps * x1[i]));
            out.sup_norm = std::max(out.sup_norm, std::abs(xe[i]));
        }
    }
    return out;
}

std::vector<ExpBoundRow> exp_moment_bound_probe(ProbeProcess proc, double q, double t,
                                                std::span<const double> eps_ladder,
                                                const Mollifier& phi, double dt_p,
                                                long replicas, uint64_t seed,
                                                int threads) {
    const SampledKernel conv = self_convolve(phi, 1.0, 0, phi.width() / 256.0);
    const double theta = 1.0 - phi.l2_norm_sq();
    std::vector<ExpBoundRow> rows;
    for (double eps : eps_ladder) {
        const long n_steps = steps_for(t, dt_p);
        const double dt = t / static_cast<double>(n_steps);
        const double sq_dt = std::sqrt(dt);
        auto samples = replica_map(replicas, threads, [&](long r) {
            Rng rng = Rng::stream(seed, kOracleProbe, static_cast<uint64_t>(r));
            std::array<double, kMaxParticles> x{}, z{}, dy{};
            double acc = 0.0;
            if (proc == ProbeProcess::brownian) {
                double y = 0.0;  // X^1 - X^2 directly: a sqrt(2)-Brownian motion
                const double sq2 = std::sqrt(2.0);
                for (long k = 0; k < n_steps; ++k) {
                    acc += conv.eval(y / eps) / eps * dt;
                    y += sq2 * sq_dt * rng.gaussian();
                }
            } else {
                CenStepper stepper(2, eps, theta, &conv);
                for (long k = 0; k < n_steps; ++k) {
                    acc += stepper.pair_potential(x[0] - x[1]) * dt;
                    z[0] = rng.gaussian();
                    z[1] = rng.gaussian();
                    stepper.step({x.data(), 2}, {z.data(), 2}, dt, {dy.data(), 2});
                }
            }
            return std::exp(q * acc);
        });
        ExpBoundRow row;
        row.eps = eps;
        row.estimate = estimate_from_samples(samples, seed);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace shelab