#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tapscope/errors.hpp"

namespace tapscope {

// Gauss-Hermite rule for the standard normal weight: sum_i w_i f(x_i) ~ E f(G).
// Weights sum to one.
struct HermiteRule {
    std::vector<double> x;
    std::vector<double> w;
    int order() const { return static_cast<int>(x.size()); }
};

// Cached, thread-safe. Nodes from the Jacobi matrix eigenvalues, polished by
// Newton on the normalized recurrence; weights in log scale so orders in the
// thousands do not overflow.
const HermiteRule& hermite_rule(int order);

// tanh-type integrands have poles at distance pi/2 from the real axis, i.e.
// pi/(2 sigma) in the standard-normal variable, so the rule needs O(sigma^2)
// nodes once sigma is large. Returns max(base, ceil(kNodesPerUnitVariance*var)).
inline constexpr double kNodesPerUnitVariance = 160.0;
int order_for_variance(double variance, int base);

namespace detail {
[[noreturn]] void throw_nonfinite(double node);
}

template <class F>
double gaussian_expectation(F&& f, double mean, double variance, int order)
{
    if (order < 2) throw DomainError("gaussian_expectation: order must be >= 2");
    if (!(variance >= 0.0)) throw DomainError("gaussian_expectation: negative variance");
    if (variance == 0.0) {
        double v = f(mean);
        if (!std::isfinite(v)) detail::throw_nonfinite(mean);
        return v;
    }
    const HermiteRule& r = hermite_rule(order);
    const double s = std::sqrt(variance);
    double acc = 0.0;
    for (int i = 0; i < r.order(); ++i) {
        const double t = mean + s * r.x[i];
        const double v = f(t);
        if (!std::isfinite(v)) detail::throw_nonfinite(t);
        acc += r.w[i] * v;
    }
    return acc;
}

// Type-erased form for plug-in integrands.
double gaussian_expectation_fn(const std::function<double(double)>& f, double mean,
                               double variance, int order);

// E f(G1, G2) for independent standard normals, tensor-product rule.
template <class F>
double gaussian_expectation_2d(F&& f, int order1, int order2)
{
    const HermiteRule& a = hermite_rule(order1);
    const HermiteRule& b = hermite_rule(order2);
    double acc = 0.0;
    for (int i = 0; i < a.order(); ++i) {
        double row = 0.0;
        for (int j = 0; j < b.order(); ++j) {
            const double v = f(a.x[i], b.x[j]);
            if (!std::isfinite(v)) detail::throw_nonfinite(a.x[i]);
            row += b.w[j] * v;
        }
        acc += a.w[i] * row;
    }
    return acc;
}

}  // namespace tapscope
