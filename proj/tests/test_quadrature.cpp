#include <cmath>

#include <gtest/gtest.h>

#include "tapscope/quadrature.hpp"
#include "tapscope/stats.hpp"

using namespace tapscope;

TEST(Hermite, WeightsSumToOneAndNodesSymmetric)
{
    for (int order : {2, 7, 40, 200, 1500}) {
        const HermiteRule& r = hermite_rule(order);
        ASSERT_EQ(r.order(), order);
        double s = 0.0;
        for (double w : r.w) s += w;
        EXPECT_NEAR(s, 1.0, 1e-13) << order;
        for (int i = 0; i < order; ++i) EXPECT_NEAR(r.x[i], -r.x[order - 1 - i], 1e-9 * (1 + std::abs(r.x[i])));
    }
}

TEST(Hermite, ExactForPolynomialMoments)
{
    // E G^{2j} = (2j-1)!!, exact up to degree 2*order-1
    const int order = 20;
    double dfact = 1.0;
    for (int j = 1; j <= 10; ++j) {
        dfact *= 2 * j - 1;
        const double m = gaussian_expectation([j](double t) { return std::pow(t, 2 * j); }, 0.0, 1.0, order);
        EXPECT_NEAR(m / dfact, 1.0, 1e-11) << j;
        const double odd = gaussian_expectation([j](double t) { return std::pow(t, 2 * j - 1); }, 0.0, 1.0, order);
        EXPECT_NEAR(odd / dfact, 0.0, 1e-11);
    }
}

TEST(Hermite, SmoothIntegrands)
{
    // E cos(sG) = exp(-s^2/2), E exp(aG) = exp(a^2/2)
    EXPECT_NEAR(gaussian_expectation([](double t) { return std::cos(t); }, 0.0, 4.0, 200), std::exp(-2.0), 1e-14);
    EXPECT_NEAR(gaussian_expectation([](double t) { return std::exp(t); }, 0.5, 1.0, 200), std::exp(1.0), 1e-12);
}

TEST(Hermite, TanhNishimoriIdentity)
{
    // E tanh(g + sqrt(g) G) = E tanh^2(g + sqrt(g) G) at every g > 0
    for (double g : {0.05, 0.5, 2.0, 9.0}) {
        const int order = order_for_variance(g, 200);
        const double a = gaussian_expectation([](double t) { return std::tanh(t); }, g, g, order);
        const double b = gaussian_expectation([](double t) { return std::tanh(t) * std::tanh(t); }, g, g, order);
        EXPECT_NEAR(a, b, 1e-12) << g;
    }
}

TEST(Hermite, OrderGrowsWithVariance)
{
    EXPECT_EQ(order_for_variance(0.5, 200), 200);
    EXPECT_EQ(order_for_variance(9.0, 200), 1440);
    EXPECT_EQ(order_for_variance(100.0, 200), 8000);  // capped
}

TEST(Hermite, Rejects)
{
    EXPECT_THROW(gaussian_expectation([](double t) { return t; }, 0.0, 1.0, 1), DomainError);
    EXPECT_THROW(gaussian_expectation([](double t) { return t; }, 0.0, -1.0, 20), DomainError);
    EXPECT_THROW(gaussian_expectation([](double t) { return 1.0 / (t - t); }, 0.0, 1.0, 20), DomainError);
    EXPECT_DOUBLE_EQ(gaussian_expectation([](double t) { return 3 * t; }, 2.0, 0.0, 20), 6.0);
}

TEST(Hermite, TwoDimensional)
{
    const double v = gaussian_expectation_2d([](double a, double b) { return a * a * b * b + a * b; }, 10, 12);
    EXPECT_NEAR(v, 1.0, 1e-13);
}

TEST(Stats, PercentileType7)
{
    std::vector<double> v{4, 1, 3, 2, 5};
    EXPECT_DOUBLE_EQ(median(v), 3.0);
    EXPECT_DOUBLE_EQ(percentile(v, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(percentile(v, 0.05), 1.2);
    EXPECT_DOUBLE_EQ(percentile(v, 1.0), 5.0);
    EXPECT_DOUBLE_EQ(median({1.0, 2.0}), 1.5);
    const Summary s = summarize(v);
    EXPECT_EQ(s.count, 5);
    EXPECT_DOUBLE_EQ(s.mean, 3.0);
    EXPECT_DOUBLE_EQ(s.p95, 4.8);
    EXPECT_DOUBLE_EQ(fraction({true, false, true, true}), 0.75);
    EXPECT_THROW(median({}), std::exception);
}
