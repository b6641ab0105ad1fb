#include "shelab/mollifier.hpp"

#include <cmath>
#include <mutex>

#include "shelab/quadrature.hpp"

namespace shelab {

namespace {

// polynomial in u, dense coefficients
using Poly = std::vector<double>;

Poly poly_derivative(const Poly& p) {
    Poly d(p.size() > 1 ? p.size() - 1 : 1, 0.0);
    for (size_t i = 1; i < p.size(); ++i) d[i - 1] = p[i] * static_cast<double>(i);
    return d;
}

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly c(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

Poly poly_add(Poly a, const Poly& b) {
    if (b.size() > a.size()) a.resize(b.size(), 0.0);
    for (size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

double poly_eval(const Poly& p, double u) {
    double r = 0.0;
    for (size_t i = p.size(); i-- > 0;) r = r * u + p[i];
    return r;
}

// P_k for d^k/du^k exp(-1/(1-u^2)) = P_k(u) (1-u^2)^{-2k} exp(-1/(1-u^2))
const std::vector<Poly>& bump_polys() {
    static std::vector<Poly> polys;
    static std::once_flag once;
    std::call_once(once, [] {
        const Poly one_minus_u2 = {1.0, 0.0, -1.0};
        const Poly sq = poly_mul(one_minus_u2, one_minus_u2);
        polys.push_back(Poly{1.0});
        for (int k = 0; k + 1 <= Mollifier::kMaxDeriv; ++k) {
            const Poly& pk = polys.back();
            Poly next = poly_mul(poly_derivative(pk), sq);
            // 4k u (1-u^2) - 2u = (4k - 2) u - 4k u^3
            Poly lin = {0.0, 4.0 * k - 2.0, 0.0, -4.0 * k};
            next = poly_add(next, poly_mul(lin, pk));
            polys.push_back(next);
        }
    });
    return polys;
}

double bump_deriv(int k, double u) {
    double d = 1.0 - u * u;
    if (d <= 1e-3) return 0.0;  // exp(-1/d) underflows well before this matters
    double e = std::exp(-1.0 / d);
    if (e == 0.0) return 0.0;
    return poly_eval(bump_polys()[static_cast<size_t>(k)], u) *
           std::pow(d, -2.0 * k) * e;
}

double bump_norm_constant() {
    static double c = 0.0;
    static std::once_flag once;
    std::call_once(once, [] {
        double I = simpson_refine([](double u) { return bump_deriv(0, u); }, -1.0, 1.0,
                                  1e-13);
        c = 1.0 / I;
    });
    return c;
}

}  // namespace

Mollifier::Mollifier(double width, double amplitude)
    : width_(width), amplitude_(amplitude) {
    if (width_ <= 0.0) throw MollifierError("mollifier width must be positive");
}

double Mollifier::derivative(int k, double x) const {
    if (k < 0 || k > kMaxDeriv)
        throw MollifierError("unsupported mollifier derivative order");
    double u = x / width_;
    if (u <= -1.0 || u >= 1.0) return 0.0;
    double scale = amplitude_ * bump_norm_constant() / std::pow(width_, k + 1.0);
    return scale * bump_deriv(k, u);
}

double Mollifier::l2_norm_sq() const {
    if (l2_cache_ < 0.0) {
        l2_cache_ = simpson_refine(
            [this](double x) {
                double v = value(x);
                return v * v;
            },
            -width_, width_, 1e-12);
    }
    return l2_cache_;
}

Mollifier Mollifier::with_l2_norm_sq(double target, double amplitude) {
    if (target <= 0.0) throw MollifierError("target L2 norm must be positive");
    // ||phi_w||^2 = ||phi_1||^2 / w at fixed unit integral
    double base = Mollifier(1.0, amplitude).l2_norm_sq();
    return Mollifier(base / target, amplitude);
}

SampledKernel self_convolve(const Mollifier& phi, double eps, int deriv_order,
                            double h) {
    if (eps <= 0.0) throw MollifierError("eps must be positive");
    if (deriv_order < 0 || deriv_order > Mollifier::kMaxDeriv)
        throw MollifierError("unsupported convolution derivative order");
    double w = phi.width();
    if (h > eps * w / 64.0 + 1e-15)
        throw MollifierError("self_convolve: grid too coarse for the mollifier scale");

    double support = 2.0 * eps * w;
    SampledKernel out = SampledKernel::on_grid(-support, support, h);
    out.support_radius = support;

    // Phi_eps^{(k)}(x) = int phi_eps(y) phi_eps^{(k)}(x - y) dy over |y| < eps w
    const int n_inner = 256;
    for (size_t i = 0; i < out.values.size(); ++i) {
        double x = out.x_at(i);
        if (std::abs(x) >= support) continue;
        out.values[i] = simpson(
            [&](double y) {
                double pe = phi.value(y / eps) / eps;
                double pk = phi.derivative(deriv_order, (x - y) / eps) /
                            std::pow(eps, deriv_order + 1.0);
                return pe * pk;
            },
            -eps * w, eps * w, n_inner);
    }
    return out;
}

double sigma_p_squared(const Mollifier& phi, int p) {
    if (p < 1 || 2 * p > Mollifier::kMaxDeriv)
        throw MollifierError("sigma_p_squared: unsupported p");
    double w = phi.width();
    auto conv = [&](double x) {
        return simpson(
            [&](double y) { return phi.value(y) * phi.derivative(2 * p - 1, x - y); },
            -w, w, 256);
    };
    return simpson_refine([&](double x) { double c = conv(x); return c * c; }, -2.0 * w,
                          2.0 * w, 1e-9);
}

namespace {

double phi_self_conv0(const Mollifier& phi, double x) {
    double w = phi.width();
    if (std::abs(x) >= 2.0 * w) return 0.0;
    return simpson([&](double y) { return phi.value(y) * phi.value(x - y); }, -w, w, 256);
}

}  // namespace

double gamma_ext_squared(const Mollifier& phi) {
    double peak = phi.l2_norm_sq();  // (phi*phi)(0) = ||phi||^2
    if (peak >= 1.0)
        throw MollifierError("gamma_ext_squared: (phi*phi)(0) >= 1, integrand singular");
    double w = phi.width();
    return simpson_refine(
        [&](double x) {
            double c = phi_self_conv0(phi, x);
            return c / (1.0 - c);
        },
        -2.0 * w, 2.0 * w, 1e-9);
}

SampledKernel psi_profile(const Mollifier& phi, double h) {
    double peak = phi.l2_norm_sq();
    if (peak >= 1.0)
        throw MollifierError("psi_profile: (phi*phi)(0) >= 1, integrand singular");
    double w = phi.width();
    double support = 2.0 * w;
    // sample out to 11x support so the asymptotic slope can be probed directly
    SampledKernel out = SampledKernel::on_grid(-support, 11.0 * support, h);
    out.support_radius = support;

    std::vector<double> rhs(out.values.size(), 0.0);
    for (size_t i = 0; i < rhs.size(); ++i) {
        double x = out.x_at(i);
        if (std::abs(x) >= support) continue;
        double c = phi_self_conv0(phi, x);
        rhs[i] = c / (1.0 - c);
    }
    // Psi = Psi' = 0 at the left support edge, where Psi'' vanishes
    std::vector<double> slope = cumulative_integral(rhs, h);
    out.values = cumulative_integral(slope, h);
    out.right_slope = slope.back();
    return out;
}

SampledKernel psi_eps_profile(const Mollifier& phi, double eps, int p, double h) {
    if (p < 1 || 2 * p > Mollifier::kMaxDeriv)
        throw MollifierError("psi_eps_profile: unsupported p");
    SampledKernel conv = self_convolve(phi, eps, 2 * p - 1, h);
    double support = conv.support_radius;
    double amp = std::pow(eps, 4.0 * p - 1.0);

    SampledKernel out = SampledKernel::on_grid(-support, 2.0 * support, h);
    out.support_radius = support;
    std::vector<double> rhs(out.values.size(), 0.0);
    for (size_t i = 0; i < rhs.size(); ++i) {
        double c = conv.eval(out.x_at(i));
        rhs[i] = amp * c * c;
    }
    std::vector<double> slope = cumulative_integral(rhs, h);
    out.values = cumulative_integral(slope, h);
    out.right_slope = slope.back();
    return out;
}

LimitConstants limit_constants(const Mollifier& phi, int p) {
    LimitConstants c;
    c.theta = 1.0 - phi.l2_norm_sq();
    c.sigma_p_sq = sigma_p_squared(phi, p);
    c.gamma_ext_sq = gamma_ext_squared(phi);
    return c;
}

}  // namespace shelab
