#pragma once

#include <span>
#include <vector>

namespace shelab {

// Uniformly gridded real function. Kernels that represent convolutions of
// compactly supported functions vanish identically outside support_radius;
// profile-type kernels (the ODE profiles) instead continue linearly to the
// right with slope right_slope, and eval_extended handles that.
struct SampledKernel {
    std::vector<double> values;
    double spacing = 0.0;
    int origin_index = 0;
    double support_radius = 0.0;
    double right_slope = 0.0;

    double x_min() const { return -origin_index * spacing; }
    double x_max() const {
        return (static_cast<double>(values.size()) - 1.0 - origin_index) * spacing;
    }
    double x_at(size_t i) const {
        return (static_cast<double>(i) - origin_index) * spacing;
    }

    // linear interpolation, 0 outside the sampled range
    double eval(double x) const;

    // linear interpolation with flat-left / linear-right extension
    double eval_extended(double x) const;

    // Simpson sum over the sampled range
    double integral() const;

    static SampledKernel on_grid(double x_min, double x_max, double h);
};

// Kernel evaluation rescaled per phi_eps conventions: if base holds K at unit
// scale, Scaled{base, eps, k} evaluates eps^{-(1+k)} K(x/eps).
struct ScaledKernel {
    const SampledKernel* base = nullptr;
    double inv_eps = 1.0;
    double amp = 1.0;

    ScaledKernel() = default;
    ScaledKernel(const SampledKernel& b, double eps, int deriv_order);

    double operator()(double x) const { return amp * base->eval(x * inv_eps); }
};

}  // namespace shelab
