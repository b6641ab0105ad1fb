#pragma once

#include <stdexcept>
#include <vector>

#include "shelab/kernel.hpp"

namespace shelab {

class MollifierError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Smooth even bump phi(x) = (amplitude/width) * c * exp(-1/(1-(x/width)^2))
// on (-width, width), with c chosen so that the integral equals `amplitude`.
// Derivatives come from the exact polynomial recurrence for the bump
// d^k/du^k exp(-1/(1-u^2)) = P_k(u) (1-u^2)^{-2k} exp(-1/(1-u^2)),
//   P_{k+1} = P_k'(1-u^2)^2 + (4k u (1-u^2) - 2u) P_k,
// not from finite differences.
class Mollifier {
public:
    static constexpr int kMaxDeriv = 8;

    explicit Mollifier(double width = 1.0, double amplitude = 1.0);

    double width() const { return width_; }
    double amplitude() const { return amplitude_; }

    double value(double x) const { return derivative(0, x); }
    double derivative(int k, double x) const;

    double integral() const { return amplitude_; }
    double l2_norm_sq() const;  // cached quadrature of phi^2

    // width-preserving amplitude control: widen/narrow the bump so that
    // ||phi||_{L^2}^2 hits `target` while the integral stays = amplitude
    static Mollifier with_l2_norm_sq(double target, double amplitude = 1.0);

    bool valid_for_ashe() const { return l2_norm_sq() < 1.0; }

private:
    double width_;
    double amplitude_;
    mutable double l2_cache_ = -1.0;
};

// ---- mollifier-derived kernels and constants ------------------------------

// Phi_eps^{(k)} = phi_eps * phi_eps^{(k)} sampled on [-2 eps w, 2 eps w]
// by composite Simpson. pre: h <= eps*w/64, 0 <= k <= 2p (<= kMaxDeriv-2).
SampledKernel self_convolve(const Mollifier& phi, double eps, int deriv_order, double h);

// sigma_p^2 = int (phi * phi^{(2p-1)})^2, scale-free in eps
double sigma_p_squared(const Mollifier& phi, int p);

// gamma_ext^2 = int Phi / (1 - Phi); requires (phi*phi)(0) < 1
double gamma_ext_squared(const Mollifier& phi);

// Psi'' = Phi/(1-Phi), Psi(-inf) = 0, by double cumulative quadrature from the
// left support edge; linear with slope int Psi'' past the right edge
SampledKernel psi_profile(const Mollifier& phi, double h);

// Psi_eps'' = eps^{4p-1} (Phi_eps^{(2p-1)})^2, Psi_eps(-inf) = 0
SampledKernel psi_eps_profile(const Mollifier& phi, double eps, int p, double h);

struct LimitConstants {
    double theta = 0.0;        // 1 - ||phi||_{L^2}^2
    double sigma_p_sq = 0.0;   // at the requested p
    double gamma_ext_sq = 0.0;
};

LimitConstants limit_constants(const Mollifier& phi, int p);

}  // namespace shelab
