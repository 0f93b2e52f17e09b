#include "tapscope/quadrature.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include <Eigen/Dense>

namespace tapscope {

namespace detail {
void throw_nonfinite(double node)
{
    throw DomainError("gaussian_expectation: non-finite integrand at t=" + std::to_string(node));
}
}  // namespace detail

namespace {

// Normalized probabilists' Hermite recurrence
//   p_0 = 1, p_{j+1} = (x p_j - sqrt(j) p_{j-1}) / sqrt(j+1)
// with running rescale. Returns p_n/p_{n-1} and log|p_{n-1}|.
struct RecurrenceOut {
    double ratio;
    double log_abs_pnm1;
};

RecurrenceOut recurrence(int n, double x)
{
    double pm1 = 0.0, p = 1.0, logscale = 0.0;
    for (int j = 0; j < n - 1; ++j) {
        double pn = (x * p - std::sqrt(double(j)) * pm1) / std::sqrt(double(j + 1));
        pm1 = p;
        p = pn;
        double a = std::abs(p);
        if (a > 1e150) {
            p /= a;
            pm1 /= a;
            logscale += std::log(a);
        }
    }
    // p is p_{n-1}, pm1 is p_{n-2}
    double pn = (x * p - std::sqrt(double(n - 1)) * pm1) / std::sqrt(double(n));
    return {pn / p, std::log(std::abs(p)) + logscale};
}

std::unique_ptr<HermiteRule> build_rule(int n)
{
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int i = 0; i < n - 1; ++i) sub[i] = std::sqrt(double(i + 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    Eigen::VectorXd nodes = es.eigenvalues();

    auto rule = std::make_unique<HermiteRule>();
    rule->x.resize(n);
    rule->w.resize(n);
    std::vector<double> logw(n);
    for (int i = 0; i < n; ++i) {
        double x = nodes[i];
        // He_n' = n He_{n-1}  =>  p_n' = sqrt(n) p_{n-1}
        for (int it = 0; it < 3; ++it) {
            RecurrenceOut r = recurrence(n, x);
            double step = r.ratio / std::sqrt(double(n));
            if (!std::isfinite(step)) break;
            x -= step;
            if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(x))) break;
        }
        rule->x[i] = x;
        // Christoffel number for an orthonormal family: 1 / (n p_{n-1}(x)^2)
        logw[i] = -std::log(double(n)) - 2.0 * recurrence(n, x).log_abs_pnm1;
    }
    // exact symmetry about 0
    for (int i = 0; i < n / 2; ++i) {
        double a = 0.5 * (rule->x[n - 1 - i] - rule->x[i]);
        rule->x[i] = -a;
        rule->x[n - 1 - i] = a;
        double lw = 0.5 * (logw[i] + logw[n - 1 - i]);
        logw[i] = lw;
        logw[n - 1 - i] = lw;
    }
    if (n % 2 == 1) rule->x[n / 2] = 0.0;
    double mx = *std::max_element(logw.begin(), logw.end());
    double tot = 0.0;
    for (int i = 0; i < n; ++i) {
        rule->w[i] = std::exp(logw[i] - mx);
        tot += rule->w[i];
    }
    for (double& w : rule->w) w /= tot;
    return rule;
}

}  // namespace

const HermiteRule& hermite_rule(int order)
{
    if (order < 2) throw DomainError("hermite_rule: order must be >= 2");
    static std::mutex mu;
    static std::map<int, std::unique_ptr<HermiteRule>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it != cache.end()) return *it->second;
    auto [pos, ok] = cache.emplace(order, build_rule(order));
    (void)ok;
    return *pos->second;
}

int order_for_variance(double variance, int base)
{
    double need = std::ceil(kNodesPerUnitVariance * std::max(variance, 0.0));
    return std::max(base, static_cast<int>(std::min(need, 8000.0)));
}

double gaussian_expectation_fn(const std::function<double(double)>& f, double mean,
                               double variance, int order)
{
    return gaussian_expectation(f, mean, variance, order);
}

}  // namespace tapscope
