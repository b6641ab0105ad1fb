#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "shelab/kernel.hpp"
#include "shelab/mollifier.hpp"
#include "shelab/rng.hpp"
#include "shelab/stats.hpp"

namespace shelab {

class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using TestFn = std::function<double(double)>;

// compactly supported smooth bump with peak `height` at `center`
TestFn bump_test(double center, double halfwidth, double height = 1.0);

double heat_kernel(double t, double x);
// int K_t(y - x0) psi(y) dy by refined Simpson
double heat_smoothed(const TestFn& psi, double t, double x0, double span = 10.0);

// Periodic lattice on [-L, L), cells at x_i = -L + i dx.
struct LatticeGrid {
    double dx = 0.025;
    double dt = 0.025 * 0.025 / 4.0;
    double half_width = 8.0;
    int n_cells = 640;

    static LatticeGrid make(double half_width, double dx, double dt_factor = 0.25);
    int index_of(double x) const;
    double x_at(int i) const { return -half_width + i * dx; }
    long steps_to(double t) const;  // t must sit on the step grid
};

// Keyed per-step Gaussian increments with variance dt/dx per cell: any step of
// the slab can be regenerated independently, so runs over different time
// windows of the same slab share noise exactly.
class NoiseSlab {
public:
    NoiseSlab(uint64_t seed, const LatticeGrid& grid)
        : seed_(seed), sd_(std::sqrt(grid.dt / grid.dx)) {}

    void fill_step(long step, std::span<double> xi) const {
        Rng rng = Rng::stream(seed_, 0x6e6f697365ull, static_cast<uint64_t>(step));
        for (auto& v : xi) v = sd_ * rng.gaussian();
    }
    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    double sd_;
};

// kernel resampled onto lattice cells; taps[half + j] = k(j dx)
struct CellKernel {
    std::vector<double> taps;
    int half = 0;
};

CellKernel resample_kernel(const SampledKernel& k, double dx);
CellKernel mollifier_taps(const Mollifier& phi, double eps, int deriv, double dx);

// circular convolution of one step's increments with the kernel
std::vector<double> smooth_noise(const NoiseSlab& slab, const CellKernel& kernel,
                                 long step, const LatticeGrid& grid);

enum class Equation { heat, mshe, dshe, ashe, advection };

struct EquationParams {
    Equation eq = Equation::mshe;
    double sigma = 1.0;  // mshe
    double eps = 0.2;    // dshe / ashe / advection
    int p = 1;           // dshe
    Mollifier phi{};
};

// Explicit Euler-Maruyama stepper. The update is linear in the field (the
// clipped diagonal factor depends on the noise only), so discrete propagators
// compose exactly under shared noise.
class LatticeSolver {
public:
    LatticeSolver(const EquationParams& eq, const LatticeGrid& grid);

    std::vector<double> dirac(double x_source) const;
    void evolve(std::vector<double>& field, const NoiseSlab& slab, long step0,
                long n_steps);
    // adjoint evolution: applies the transposed one-step operators in reverse
    // step order; evolve followed by pairing equals pairing with the adjoint
    void evolve_adjoint(std::vector<double>& field, const NoiseSlab& slab, long step0,
                        long n_steps);

    const LatticeGrid& grid() const { return grid_; }
    long clip_events() const { return clip_events_; }
    double clip_rate() const;
    const CellKernel& noise_kernel() const { return taps_; }

private:
    void step_once(std::vector<double>& field, bool adjoint);

    EquationParams eq_;
    LatticeGrid grid_;
    CellKernel taps_;
    std::vector<double> xi_, eta_, next_, pad_buf_;
    long clip_events_ = 0;
    long cell_steps_ = 0;
};

double pair_with(std::span<const double> field, const LatticeGrid& grid,
                 const TestFn& psi);
double total_mass(std::span<const double> field, const LatticeGrid& grid);

// replica-mean of (z_t, psi)^power from a Dirac start at x_source
MomentEstimate lattice_moment(const EquationParams& eq, const LatticeGrid& grid,
                              double x_source, double t, const TestFn& psi, int power,
                              long replicas, uint64_t seed, int threads);

MomentEstimate lattice_mass_moment(const EquationParams& eq, const LatticeGrid& grid,
                                   double x_source, double t, int power, long replicas,
                                   uint64_t seed, int threads);

// noiseless (sigma = 0) field at time t, used as the discrete heat reference
std::vector<double> noiseless_field(const EquationParams& eq, const LatticeGrid& grid,
                                    double x_source, double t);

// Relative L2 distance between Z_{s,u}(x,-) and the composition
// m dx sum_{y in comb} Z_{s,t}(x,y) Z_{t,u}(y,-), all three driven by the same
// slab. subsample m = 1 reproduces the full lattice sum. A mismatched
// compose_seed (negative control) breaks the shared-noise identity.
double propagator_compose_residual(const EquationParams& eq, const LatticeGrid& grid,
                                   uint64_t slab_seed, double s, double t, double u,
                                   double x_source, int subsample,
                                   uint64_t compose_seed_offset = 0);

struct TiltCheckResult {
    MomentEstimate direct_mean, tilted_mean;    // E[(u_t, psi)]
    MomentEstimate direct_second, tilted_second;  // E[(u_t, psi)^2]
};

// aSHE moments via direct simulation vs advection-then-exponential-tilt
TiltCheckResult tilt_identity_check(double eps, const Mollifier& phi, double t,
                                    const TestFn& psi, const LatticeGrid& grid,
                                    long replicas, uint64_t seed, int threads);

// both routes of the noiseless tilt identity by quadrature (no lattice)
std::pair<double, double> tilt_identity_noiseless(double eps, double t,
                                                  const TestFn& psi);

struct SecondMomentBound {
    double t = 0.0;
    double fitted_c = 0.0;  // max over probes of E[z_t(x)^2] sqrt(t) / K(t,x)
};

std::vector<SecondMomentBound> second_moment_bound_probe(
    const EquationParams& eq, const LatticeGrid& grid, std::span<const double> times,
    long replicas, uint64_t seed, int threads);

}  // namespace shelab
