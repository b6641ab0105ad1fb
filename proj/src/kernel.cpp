#include "shelab/kernel.hpp"

#include <cmath>

#include "shelab/quadrature.hpp"

namespace shelab {

double SampledKernel::eval(double x) const {
    double u = x / spacing + origin_index;
    if (u <= 0.0 || u >= static_cast<double>(values.size() - 1)) {
        // exact endpoints still count
        if (u == 0.0) return values.front();
        if (u == static_cast<double>(values.size() - 1)) return values.back();
        return 0.0;
    }
    size_t i = static_cast<size_t>(u);
    double f = u - static_cast<double>(i);
    return values[i] * (1.0 - f) + values[i + 1] * f;
}

double SampledKernel::eval_extended(double x) const {
    if (x <= x_min()) return values.front();
    if (x >= x_max()) return values.back() + right_slope * (x - x_max());
    return eval(x);
}

double SampledKernel::integral() const { return simpson_sampled(values, spacing); }

SampledKernel SampledKernel::on_grid(double x_min, double x_max, double h) {
    SampledKernel k;
    k.spacing = h;
    k.origin_index = static_cast<int>(std::lround(-x_min / h));
    size_t n = static_cast<size_t>(std::lround((x_max - x_min) / h)) + 1;
    k.values.assign(n, 0.0);
    return k;
}

ScaledKernel::ScaledKernel(const SampledKernel& b, double eps, int deriv_order)
    : base(&b), inv_eps(1.0 / eps), amp(std::pow(eps, -(1.0 + deriv_order))) {}

}  // namespace shelab
