#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace shelab {

// Composite Simpson over [a, b] with n intervals (n rounded up to even).
double simpson(const std::function<double(double)>& f, double a, double b, int n);

// Simpson with interval doubling until |I_k - I_{k-1}| <= rel_tol * |I_k| + abs_floor.
// Throws on non-convergence.
double simpson_refine(const std::function<double(double)>& f, double a, double b,
                      double rel_tol = 1e-10, double abs_floor = 1e-14,
                      int n0 = 64, int max_doublings = 14);

// Simpson sum of uniformly sampled values (odd count preferred; trailing
// interval handled by a trapezoid when the count is even).
double simpson_sampled(std::span<const double> values, double h);

// Cumulative integral of uniformly sampled values, 4th order
// (Simpson pairs plus a quadratic-fit half step); out[0] = 0.
std::vector<double> cumulative_integral(std::span<const double> values, double h);

}  // namespace shelab
