#pragma once

#include <array>
#include <span>
#include <vector>

#include "shelab/lattice.hpp"
#include "shelab/mollifier.hpp"
#include "shelab/stats.hpp"

namespace shelab {

constexpr int kMaxParticles = 4;

// discrete Tanaka functional |X_N| - |X_0| - sum sgn(X_k)(X_{k+1} - X_k),
// with sgn(0) := 0; estimates the semimartingale local time at 0
double local_time_tanaka(std::span<const double> path);

enum class LocalTimeEstimator {
    tanaka,
    // band occupation (1/2delta) int 1{|X| < delta} ds. This estimates the
    // occupation density of X at 0 in ds, which for a difference of two
    // independent Brownian motions (quadratic variation 2t) is HALF the
    // Tanaka local time.
    band_occupation,
};

// E[ prod_j psi(B^j_t) exp(gamma sum_{i<j} L_0^{B^i - B^j}(t)) ] with L_0 the
// Tanaka (semimartingale) local time of each pairwise difference.
MomentEstimate bm_local_time_moment(int n, std::span<const double> x0, double t,
                                    double gamma, const TestFn& psi, double dt_p,
                                    long replicas, uint64_t seed, int threads,
                                    LocalTimeEstimator est = LocalTimeEstimator::tanaka,
                                    double band_delta = 0.0);

// Conversion between the two local-time conventions at the oracle call sites:
// a pair potential c * delta_0 accumulated in ds equals (c/2) * Tanaka local
// time of the difference, because d<B^i - B^j> = 2 ds.
inline double tanaka_gamma_from_pair_coefficient(double c) { return 0.5 * c; }

// Closed-form pair mass moment of the sigma-mSHE from coincident Dirac
// sources: E[M_t^2] = E[exp(sigma^2 int_0^t delta_0(B^1_s - B^2_s) ds)],
// evaluated by quadrature via the Levy identity (the ds-occupation density of
// B^1 - B^2 at 0 has the law of |B^1_t - B^2_t| / 2).
double pair_mass_moment_quadrature(double sigma, double t);

// Same number in closed form: 2 exp(sigma^4 t / 4) Phi(sigma^2 sqrt(t/2)).
double pair_mass_moment_closed_form(double sigma, double t);

// pre-Girsanov route for the derivative-noise chain: plain Brownian paths,
// exponent kernel eps^{2p-1/2} (phi_eps^{(p)} correlated with itself), i.e.
// (-1)^p Phi_eps^{(2p)}
MomentEstimate bm_phi_exponent_moment(int n, std::span<const double> x0, double t,
                                      double eps, int p, const Mollifier& phi,
                                      const TestFn& psi, double dt_p, long replicas,
                                      uint64_t seed, int threads);

// drifted-diffusion route for the same moments (Girsanov-transformed form,
// with endpoint terms, squared-kernel exponent and the triple-intersection
// accumulator)
MomentEstimate diff_eps_moment(int n, std::span<const double> x0, double t, double eps,
                               int p, const Mollifier& phi, const TestFn& psi,
                               double dt_p, long replicas, uint64_t seed, int threads);

// ---- Cen / Sing diffusions -------------------------------------------------

// Euler step engine for the centered diffusion with covariance
// theta I + eps Phi_eps(y_i - y_j) (PSD: theta > 0 and Phi_eps is a
// self-convolution, hence positive definite). The square root comes from a
// symmetric eigen-factorization recomputed each step; factorization failure is
// a hard error with a state dump. phi_conv must outlive the stepper and hold
// phi*phi at unit scale.
class CenStepper {
public:
    CenStepper(int n, double eps, double theta, const SampledKernel* phi_conv);

    // factorizes A(y), advances y in place using the n standard Gaussians z,
    // writes the realized martingale increment into dy
    void step(std::span<double> y, std::span<const double> z, double dt,
              std::span<double> dy);

    // drift of the Sing diffusion at y: b_i = eps^{1/2} sum_{j != i} Phi_eps
    void sing_drift(std::span<const double> y, std::span<double> b) const;

    // solve A lambda = b with the factorization from the latest step()
    void solve_from_factorization(std::span<const double> b,
                                  std::span<double> lambda) const;

    double pair_potential(double d) const;  // Phi_eps(d)
    double theta() const { return theta_; }

private:
    void factorize(std::span<const double> y);

    int n_;
    double eps_;
    double theta_;
    const SampledKernel* phi_conv_;
    std::array<double, kMaxParticles * kMaxParticles> a_{}, q_{};
    std::array<double, kMaxParticles> lam_{};
};

// E_Sing[ exp(sum_{i<j} int Phi_eps(X^i - X^j) ds) prod psi(X^j_t) ]
MomentEstimate sing_eps_moment(int n, std::span<const double> x0, double t, double eps,
                               const Mollifier& phi, const TestFn& psi, double dt_p,
                               long replicas, uint64_t seed, int threads);

enum class GirsanovFunctional {
    unit,                   // F = 1: the weight alone, mean 1
    psi_first_coordinate,   // F = psi(X^1_t)
    pair_exponent_psi,      // F = exp(sum int Phi_eps) prod psi: the Sing moment
};

// E_Cen[e^{D - <D>/2} F] with D = int lambda . dM, A lambda = b
MomentEstimate girsanov_reweighted_moment(int n, std::span<const double> x0, double t,
                                          double eps, const Mollifier& phi,
                                          GirsanovFunctional functional,
                                          const TestFn& psi, double dt_p,
                                          long replicas, uint64_t seed, int threads);

struct RescaleCouplingResult {
    double max_discrepancy = 0.0;  // max_k,i |X^eps_i(t_k) - eps X^1_i(t_k / eps^2)|
    double sup_norm = 0.0;         // path sup norm of the eps-scale system
};

// Cen(eps) from eps*x0 with dt = eps^2 dt1 against eps * Cen(1) from x0 with
// dt1, both driven by the identical Gaussian stream
RescaleCouplingResult rescale_coupling_check(int n, std::span<const double> x0,
                                             double t, double eps,
                                             const Mollifier& phi, double dt1,
                                             uint64_t seed);

enum class ProbeProcess { brownian, centered };

struct ExpBoundRow {
    double eps = 0.0;
    MomentEstimate estimate;
};

// E[exp(q int_0^t Phi_eps(X^1 - X^2) ds)] across an eps ladder
std::vector<ExpBoundRow> exp_moment_bound_probe(ProbeProcess proc, double q, double t,
                                                std::span<const double> eps_ladder,
                                                const Mollifier& phi, double dt_p,
                                                long replicas, uint64_t seed,
                                                int threads);

}  // namespace shelab
