#include "shelab/quadrature.hpp"

#include <cmath>
#include <cstdio>

namespace shelab {

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n < 2) n = 2;
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double odd = 0.0, even = 0.0;
    for (int i = 1; i < n; i += 2) odd += f(a + i * h);
    for (int i = 2; i < n; i += 2) even += f(a + i * h);
    return (f(a) + f(b) + 4.0 * odd + 2.0 * even) * h / 3.0;
}

double simpson_refine(const std::function<double(double)>& f, double a, double b,
                      double rel_tol, double abs_floor, int n0, int max_doublings) {
    double prev = simpson(f, a, b, n0);
    int n = n0;
    for (int k = 0; k < max_doublings; ++k) {
        n *= 2;
        double cur = simpson(f, a, b, n);
        if (std::abs(cur - prev) <= rel_tol * std::abs(cur) + abs_floor) return cur;
        prev = cur;
    }
    throw std::runtime_error("simpson_refine: quadrature did not converge");
}

double simpson_sampled(std::span<const double> v, double h) {
    const size_t n = v.size();
    if (n < 2) return 0.0;
    if (n == 2) return 0.5 * h * (v[0] + v[1]);
    size_t m = (n % 2) ? n : n - 1;  // odd node count -> even interval count
    double odd = 0.0, even = 0.0;
    for (size_t i = 1; i + 1 < m; i += 2) odd += v[i];
    for (size_t i = 2; i + 1 < m; i += 2) even += v[i];
    double s = (v[0] + v[m - 1] + 4.0 * odd + 2.0 * even) * h / 3.0;
    if (m != n) s += 0.5 * h * (v[n - 2] + v[n - 1]);
    return s;
}

std::vector<double> cumulative_integral(std::span<const double> v, double h) {
    const size_t n = v.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    if (n == 2) {
        out[1] = 0.5 * h * (v[0] + v[1]);
        return out;
    }
    // quadratic through (0,1,2) for the first half-step
    out[1] = h / 12.0 * (5.0 * v[0] + 8.0 * v[1] - v[2]);
    for (size_t i = 2; i < n; ++i)
        out[i] = out[i - 2] + h / 3.0 * (v[i - 2] + 4.0 * v[i - 1] + v[i]);
    return out;
}

}  // namespace shelab
