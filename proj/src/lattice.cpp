#include "shelab/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "shelab/parallel.hpp"
#include "shelab/quadrature.hpp"

namespace shelab {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr uint64_t kLatticeStream = 0x6c61747469636575ull;
}  // namespace

TestFn bump_test(double center, double halfwidth, double height) {
    return [=](double x) {
        double u = (x - center) / halfwidth;
        double d = 1.0 - u * u;
        if (d <= 1e-12) return 0.0;
        return height * std::exp(1.0 - 1.0 / d);
    };
}

double heat_kernel(double t, double x) {
    return std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * kPi * t);
}

double heat_smoothed(const TestFn& psi, double t, double x0, double span) {
    return simpson_refine(
        [&](double y) { return heat_kernel(t, y - x0) * psi(y); }, x0 - span, x0 + span,
        1e-10, 1e-14, 512);
}

LatticeGrid LatticeGrid::make(double half_width, double dx, double dt_factor) {
    LatticeGrid g;
    g.half_width = half_width;
    g.dx = dx;
    double n = 2.0 * half_width / dx;
    g.n_cells = static_cast<int>(std::lround(n));
    if (std::abs(n - g.n_cells) > 1e-9 * n)
        throw ConfigurationError("grid: dx does not divide the domain");
    g.dt = dt_factor * dx * dx;
    if (g.dt > dx * dx / 4.0 + 1e-15)
        throw ConfigurationError("grid: CFL requires dt <= dx^2/4");
    return g;
}

int LatticeGrid::index_of(double x) const {
    long i = std::lround((x + half_width) / dx);
    long n = n_cells;
    return static_cast<int>(((i % n) + n) % n);
}

long LatticeGrid::steps_to(double t) const {
    double k = t / dt;
    long ki = std::lround(k);
    if (std::abs(k - ki) > 1e-6)
        throw ConfigurationError("time does not sit on the step grid");
    return ki;
}

CellKernel resample_kernel(const SampledKernel& k, double dx) {
    CellKernel c;
    c.half = static_cast<int>(std::ceil(k.support_radius / dx - 1e-9));
    c.taps.resize(2 * c.half + 1);
    for (int j = -c.half; j <= c.half; ++j)
        c.taps[c.half + j] = k.eval(j * dx);
    return c;
}

CellKernel mollifier_taps(const Mollifier& phi, double eps, int deriv, double dx) {
    CellKernel c;
    c.half = static_cast<int>(std::ceil(eps * phi.width() / dx - 1e-9));
    c.taps.resize(2 * c.half + 1);
    double amp = std::pow(eps, -(1.0 + deriv));
    for (int j = -c.half; j <= c.half; ++j)
        c.taps[c.half + j] = amp * phi.derivative(deriv, j * dx / eps);
    return c;
}

namespace {

// out_i = dx * sum_j taps_j xi_{i-j}, periodic; pad buffer avoids index wraps
void circular_convolve(const std::vector<double>& taps, int half,
                       const std::vector<double>& xi, double dx,
                       std::vector<double>& pad, std::vector<double>& out) {
    const int n = static_cast<int>(xi.size());
    pad.resize(xi.size() + 2 * half);
    for (int m = 0; m < n + 2 * half; ++m)
        pad[m] = xi[((m - half) % n + n) % n];
    out.resize(xi.size());
    const int nt = 2 * half + 1;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        const double* p = pad.data() + i + 2 * half;
        for (int k = 0; k < nt; ++k) s += taps[k] * p[-k];
        out[i] = dx * s;
    }
}

}  // namespace

std::vector<double> smooth_noise(const NoiseSlab& slab, const CellKernel& kernel,
                                 long step, const LatticeGrid& grid) {
    if (2 * kernel.half + 1 > grid.n_cells)
        throw ConfigurationError("smooth_noise: kernel wider than the domain");
    std::vector<double> xi(grid.n_cells), pad, out;
    slab.fill_step(step, xi);
    circular_convolve(kernel.taps, kernel.half, xi, grid.dx, pad, out);
    return out;
}

LatticeSolver::LatticeSolver(const EquationParams& eq, const LatticeGrid& grid)
    : eq_(eq), grid_(grid) {
    if (grid_.dt > grid_.dx * grid_.dx / 4.0 + 1e-15)
        throw ConfigurationError("lattice: CFL violated");
    if (eq_.eq == Equation::dshe || eq_.eq == Equation::ashe ||
        eq_.eq == Equation::advection) {
        if (grid_.dx > eq_.eps * eq_.phi.width() / 8.0 + 1e-12)
            throw ConfigurationError("lattice: dx too coarse to resolve eps");
    }
    if (eq_.eq == Equation::ashe || eq_.eq == Equation::advection) {
        if (!eq_.phi.valid_for_ashe())
            throw ValidationError("lattice: mollifier has ||phi||^2 >= 1");
        taps_ = mollifier_taps(eq_.phi, eq_.eps, 0, grid_.dx);
    } else if (eq_.eq == Equation::dshe) {
        taps_ = mollifier_taps(eq_.phi, eq_.eps, eq_.p, grid_.dx);
    }
    if (!taps_.taps.empty() && 2 * taps_.half + 1 > grid_.n_cells)
        throw ConfigurationError("lattice: noise kernel wider than the domain");
}

std::vector<double> LatticeSolver::dirac(double x_source) const {
    std::vector<double> f(grid_.n_cells, 0.0);
    f[grid_.index_of(x_source)] = 1.0 / grid_.dx;
    return f;
}

void LatticeSolver::step_once(std::vector<double>& u, bool adjoint) {
    const int n = grid_.n_cells;
    const double dx = grid_.dx;
    const double alpha = grid_.dt / (2.0 * dx * dx);
    const double diag = 1.0 - 2.0 * alpha;
    next_.resize(u.size());

    switch (eq_.eq) {
        case Equation::heat: {
            for (int i = 0; i < n; ++i) {
                int ip = i + 1 == n ? 0 : i + 1;
                int im = i == 0 ? n - 1 : i - 1;
                next_[i] = diag * u[i] + alpha * (u[ip] + u[im]);
            }
            break;
        }
        case Equation::mshe: {
            for (int i = 0; i < n; ++i) {
                double f = diag + eq_.sigma * xi_[i];
                if (f < 0.0) {
                    f = 0.0;
                    ++clip_events_;
                }
                int ip = i + 1 == n ? 0 : i + 1;
                int im = i == 0 ? n - 1 : i - 1;
                next_[i] = f * u[i] + alpha * (u[ip] + u[im]);
            }
            break;
        }
        case Equation::dshe: {
            const double amp = std::pow(eq_.eps, eq_.p - 0.25);
            for (int i = 0; i < n; ++i) {
                double f = diag + amp * eta_[i];
                if (f < 0.0) {
                    f = 0.0;
                    ++clip_events_;
                }
                int ip = i + 1 == n ? 0 : i + 1;
                int im = i == 0 ? n - 1 : i - 1;
                next_[i] = f * u[i] + alpha * (u[ip] + u[im]);
            }
            break;
        }
        case Equation::ashe: {
            const double adv = std::sqrt(eq_.eps) / (2.0 * dx);
            for (int i = 0; i < n; ++i) {
                int ip = i + 1 == n ? 0 : i + 1;
                int im = i == 0 ? n - 1 : i - 1;
                double f = diag + eta_[i];
                if (f < 0.0) {
                    f = 0.0;
                    ++clip_events_;
                }
                double flux;
                if (!adjoint) {
                    flux = adv * (u[ip] * eta_[ip] - u[im] * eta_[im]);
                } else {
                    flux = -adv * eta_[i] * (u[ip] - u[im]);
                }
                next_[i] = f * u[i] + alpha * (u[ip] + u[im]) + flux;
                if (next_[i] < 0.0 && !adjoint) {
                    next_[i] = 0.0;
                    ++clip_events_;
                }
            }
            break;
        }
        case Equation::advection: {
            const double adv = std::sqrt(eq_.eps) / (2.0 * dx);
            for (int i = 0; i < n; ++i) {
                int ip = i + 1 == n ? 0 : i + 1;
                int im = i == 0 ? n - 1 : i - 1;
                double flux;
                if (!adjoint) {
                    flux = adv * (u[ip] * eta_[ip] - u[im] * eta_[im]);
                } else {
                    flux = -adv * eta_[i] * (u[ip] - u[im]);
                }
                next_[i] = diag * u[i] + alpha * (u[ip] + u[im]) + flux;
            }
            break;
        }
    }
    cell_steps_ += n;
    u.swap(next_);
}

void LatticeSolver::evolve(std::vector<double>& field, const NoiseSlab& slab,
                           long step0, long n_steps) {
    xi_.resize(field.size());
    for (long k = 0; k < n_steps; ++k) {
        long step = step0 + k;
        if (eq_.eq != Equation::heat) {
            slab.fill_step(step, xi_);
            if (!taps_.taps.empty())
                circular_convolve(taps_.taps, taps_.half, xi_, grid_.dx, pad_buf_,
                                  eta_);
        }
        step_once(field, /*adjoint=*/false);
    }
}

void LatticeSolver::evolve_adjoint(std::vector<double>& field, const NoiseSlab& slab,
                                   long step0, long n_steps) {
    xi_.resize(field.size());
    for (long k = n_steps - 1; k >= 0; --k) {
        long step = step0 + k;
        if (eq_.eq != Equation::heat) {
            slab.fill_step(step, xi_);
            if (!taps_.taps.empty())
                circular_convolve(taps_.taps, taps_.half, xi_, grid_.dx, pad_buf_,
                                  eta_);
        }
        step_once(field, /*adjoint=*/true);
    }
}

double LatticeSolver::clip_rate() const {
    return cell_steps_ > 0
               ? static_cast<double>(clip_events_) / static_cast<double>(cell_steps_)
               : 0.0;
}

double pair_with(std::span<const double> field, const LatticeGrid& grid,
                 const TestFn& psi) {
    double s = 0.0;
    for (int i = 0; i < grid.n_cells; ++i) s += psi(grid.x_at(i)) * field[i];
    return s * grid.dx;
}

double total_mass(std::span<const double> field, const LatticeGrid& grid) {
    double s = 0.0;
    for (double v : field) s += v;
    return s * grid.dx;
}

namespace {

MomentEstimate lattice_replicas(const EquationParams& eq, const LatticeGrid& grid,
                                double x_source, double t, const TestFn* psi,
                                int power, long replicas, uint64_t seed, int threads) {
    long n_steps = grid.steps_to(t);
    auto samples = replica_map(replicas, threads, [&](long r) {
        LatticeSolver solver(eq, grid);
        NoiseSlab slab(mix64(seed, kLatticeStream, static_cast<uint64_t>(r)), grid);
        std::vector<double> field = solver.dirac(x_source);
        solver.evolve(field, slab, 0, n_steps);
        double v = psi ? pair_with(field, grid, *psi) : total_mass(field, grid);
        return power == 2 ? v * v : v;
    });
    return estimate_from_samples(samples, seed);
}

}  // namespace

MomentEstimate lattice_moment(const EquationParams& eq, const LatticeGrid& grid,
                              double x_source, double t, const TestFn& psi, int power,
                              long replicas, uint64_t seed, int threads) {
    return lattice_replicas(eq, grid, x_source, t, &psi, power, replicas, seed,
                            threads);
}

MomentEstimate lattice_mass_moment(const EquationParams& eq, const LatticeGrid& grid,
                                   double x_source, double t, int power, long replicas,
                                   uint64_t seed, int threads) {
    return lattice_replicas(eq, grid, x_source, t, nullptr, power, replicas, seed,
                            threads);
}

std::vector<double> noiseless_field(const EquationParams& eq, const LatticeGrid& grid,
                                    double x_source, double t) {
    EquationParams heat = eq;
    heat.eq = Equation::heat;
    LatticeSolver solver(heat, grid);
    NoiseSlab slab(0, grid);
    std::vector<double> field = solver.dirac(x_source);
    solver.evolve(field, slab, 0, grid.steps_to(t));
    return field;
}

double propagator_compose_residual(const EquationParams& eq, const LatticeGrid& grid,
                                   uint64_t slab_seed, double s, double t, double u,
                                   double x_source, int subsample,
                                   uint64_t compose_seed_offset) {
    if (!(s < t && t < u)) throw ConfigurationError("compose: need s < t < u");
    if (subsample < 1) throw ConfigurationError("compose: subsample must be >= 1");
    long ks = grid.steps_to(s), kt = grid.steps_to(t), ku = grid.steps_to(u);

    LatticeSolver solver(eq, grid);
    NoiseSlab slab(slab_seed, grid);

    std::vector<double> field = solver.dirac(x_source);
    solver.evolve(field, slab, ks, kt - ks);
    std::vector<double> at_t = field;
    solver.evolve(field, slab, kt, ku - kt);  // direct Z_{s,u}(x, -)

    // comb measure: subsample-spaced spikes carrying m dx Z_{s,t}(x, y) each
    std::vector<double> comb(at_t.size(), 0.0);
    for (size_t j = 0; j < at_t.size(); j += static_cast<size_t>(subsample))
        comb[j] = at_t[j] * subsample;

    NoiseSlab slab2(compose_seed_offset == 0
                        ? slab_seed
                        : mix64(slab_seed, compose_seed_offset),
                    grid);
    solver.evolve(comb, slab2, kt, ku - kt);

    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < field.size(); ++i) {
        double d = comb[i] - field[i];
        num += d * d;
        den += field[i] * field[i];
    }
    return std::sqrt(num / den);
}

TiltCheckResult tilt_identity_check(double eps, const Mollifier& phi, double t,
                                    const TestFn& psi, const LatticeGrid& grid,
                                    long replicas, uint64_t seed, int threads) {
    if (eps < 0.1 || t > 1.0)
        throw ConfigurationError("tilt: need eps >= 0.1 and t <= 1 for the tilt factor");
    double shift = t / std::sqrt(eps);
    double cells = shift / grid.dx;
    if (std::abs(cells - std::lround(cells)) > 1e-9)
        throw ConfigurationError("tilt: eps^{-1/2} t must be an integer number of cells");

    long n_steps = grid.steps_to(t);

    EquationParams ashe;
    ashe.eq = Equation::ashe;
    ashe.eps = eps;
    ashe.phi = phi;
    auto direct = replica_map(replicas, threads, [&](long r) {
        LatticeSolver solver(ashe, grid);
        NoiseSlab slab(mix64(seed, 0, static_cast<uint64_t>(r)), grid);
        std::vector<double> field = solver.dirac(0.0);
        solver.evolve(field, slab, 0, n_steps);
        return pair_with(field, grid, psi);
    });

    EquationParams adv = ashe;
    adv.eq = Equation::advection;
    const double pref = std::exp(-0.5 * t / eps);
    const double a = 1.0 / std::sqrt(eps);
    auto tilted = replica_map(replicas, threads, [&](long r) {
        LatticeSolver solver(adv, grid);
        NoiseSlab slab(mix64(seed, 1, static_cast<uint64_t>(r)), grid);
        std::vector<double> field = solver.dirac(0.0);
        solver.evolve(field, slab, 0, n_steps);
        double sum = 0.0;
        for (int i = 0; i < grid.n_cells; ++i) {
            double z = grid.x_at(i);
            double w = psi(z - shift);
            if (w != 0.0) sum += std::exp(a * z) * field[i] * w;
        }
        return pref * grid.dx * sum;
    });

    TiltCheckResult out;
    out.direct_mean = estimate_from_samples(direct, seed);
    out.tilted_mean = estimate_from_samples(tilted, seed);
    std::vector<double> d2(direct.size()), t2(tilted.size());
    for (size_t i = 0; i < direct.size(); ++i) d2[i] = direct[i] * direct[i];
    for (size_t i = 0; i < tilted.size(); ++i) t2[i] = tilted[i] * tilted[i];
    out.direct_second = estimate_from_samples(d2, seed);
    out.tilted_second = estimate_from_samples(t2, seed);
    return out;
}

std::pair<double, double> tilt_identity_noiseless(double eps, double t,
                                                  const TestFn& psi) {
    double lhs = heat_smoothed(psi, t, 0.0);
    double shift = t / std::sqrt(eps);
    double a = 1.0 / std::sqrt(eps);
    double rhs = std::exp(-0.5 * t / eps) *
                 simpson_refine(
                     [&](double z) {
                         return std::exp(a * z) * heat_kernel(t, z) * psi(z - shift);
                     },
                     shift - 12.0, shift + 12.0, 1e-11, 1e-15, 1024);
    return {lhs, rhs};
}

std::vector<SecondMomentBound> second_moment_bound_probe(
    const EquationParams& eq, const LatticeGrid& grid, std::span<const double> times,
    long replicas, uint64_t seed, int threads) {
    std::vector<SecondMomentBound> out;
    for (double t : times) {
        long n_steps = grid.steps_to(t);
        // chunked accumulation of per-cell second moments, merged in chunk order
        int chunks = std::max(threads, 1);
        std::vector<std::vector<double>> acc(chunks,
                                             std::vector<double>(grid.n_cells, 0.0));
        replica_map(replicas, threads, [&](long r) {
            LatticeSolver solver(eq, grid);
            NoiseSlab slab(mix64(seed, kLatticeStream, static_cast<uint64_t>(r)),
                           grid);
            std::vector<double> field = solver.dirac(0.0);
            solver.evolve(field, slab, 0, n_steps);
            auto& a = acc[r % chunks];
            for (int i = 0; i < grid.n_cells; ++i) a[i] += field[i] * field[i];
            return 0.0;
        });
        for (int c = 1; c < chunks; ++c)
            for (int i = 0; i < grid.n_cells; ++i) acc[0][i] += acc[c][i];

        double fitted = 0.0;
        for (int i = 0; i < grid.n_cells; ++i) {
            double x = grid.x_at(i);
            if (std::abs(x) > 3.0 * std::sqrt(t)) continue;
            double m2 = acc[0][i] / static_cast<double>(replicas);
            fitted = std::max(fitted, m2 * std::sqrt(t) / heat_kernel(t, x));
        }
        out.push_back({t, fitted});
    }
    return out;
}

}  // namespace shelab
