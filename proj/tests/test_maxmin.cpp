#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "tapscope/errors.hpp"
#include "tapscope/maxmin.hpp"

using namespace tapscope;

namespace {

std::vector<ScalarParams> both_grids()
{
    std::vector<ScalarParams> out;
    for (double l : {1.1, 1.25, 1.5, 2.0, 3.0}) out.push_back(make_scalar_params(l, 0.3, Variant::FMM));
    for (double l : {0.3, 0.5, 0.75, 0.9, 1.2}) out.push_back(make_scalar_params(l, 0.3, Variant::AMS));
    return out;
}

}  // namespace

TEST(Theta, ClosedFormSimpleCase)
{
    const ScalarParams p = make_scalar_params(1.5, 0.3, Variant::FMM);
    const double xi = 0.7, u = 0.4;
    const double want = std::pow(2 * 1.5 * xi, 2) / (4.0 / (1 - u * u));
    EXPECT_NEAR(theta_closed_form(0.3, 0.2, xi, u, MaxMinQuery{}, p), want, 1e-14);
}

TEST(Theta, MatchesGridMaximization)
{
    const ScalarParams p = make_scalar_params(1.5, 0.3, Variant::AMS);
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const MaxMinQuery q{0.9 * U(gen), 0.0, U(gen), U(gen), 0.45 * (U(gen) + 1.0)};
        const double g = 2 * U(gen), m = 0.99 * U(gen), xi = 2 * U(gen), u = 0.9 * U(gen);
        double best = -1e300;
        for (int i = 0; i <= 100000; ++i) best = std::max(best, theta_objective(-50 + 1e-3 * i, g, m, xi, u, q, p));
        const double cf = theta_closed_form(g, m, xi, u, q, p);
        const double curv = 1 / (1 - u * u) - q.alpha_v;
        EXPECT_GE(cf, best - 1e-12);
        EXPECT_LE(cf - best, curv * 0.25e-6 + 1e-12);  // half step squared times curvature
    }
}

TEST(Theta, DivergesAsAlphaVToOne)
{
    const ScalarParams p = make_scalar_params(1.5, 0.3, Variant::FMM);
    MaxMinQuery q;
    double prev = 0;
    for (double e : {1e-2, 1e-3, 1e-4}) {
        q.alpha_v = 1 - e;
        const double th = theta_closed_form(0.1, 0.1, 0.5, 0.0, q, p) * e;
        if (prev > 0) EXPECT_NEAR(th, prev, 0.02 * prev);
        prev = th;
    }
    q.alpha_v = 1.0;
    EXPECT_THROW(theta_closed_form(0.1, 0.1, 0.5, 0.0, q, p), DomainError);
    EXPECT_THROW(L_value(q, p), DomainError);
    EXPECT_THROW(A_matrices(1.0, p), DomainError);
}

TEST(L, VanishesAtOrigin)
{
    for (const auto& p : both_grids()) EXPECT_NEAR(L_value(MaxMinQuery{}, p), 0.0, 1e-10) << p.lambda;
}

TEST(L, AlphaVDerivativeAtOrigin)
{
    for (const auto& p : both_grids()) {
        MaxMinQuery a, b;
        a.alpha_v = 1e-5;
        b.alpha_v = -1e-5;
        const double d = (L_value(a, p) - L_value(b, p)) / 2e-5;
        EXPECT_LT(d, 0.0);
        EXPECT_LT(d, -1 + p.lambda * p.lambda * (1 - p.q_inf) + 1e-3);
    }
}

TEST(L, MatchesIndependentOracles)
{
    // adaptive-quadrature reference and a 1e7-draw Monte Carlo of the
    // pre-integration form (0.19192 +- 0.00062) for the FMM case
    const MaxMinQuery q{0.3, 0.1, 0.05, 0.05, 0.2};
    const ScalarParams f = make_scalar_params(1.5, 0.3, Variant::FMM);
    const ScalarParams a = make_scalar_params(1.5, 0.3, Variant::AMS);
    EXPECT_NEAR(L_value(q, f), 0.191478950705935, 1e-8);
    EXPECT_NEAR(L_value(q, f), 0.1919196976, 3 * 0.000621);
    EXPECT_NEAR(L_value(q, a), -0.108431584711846, 1e-8);
}

TEST(AMatrices, QuadraticFormIdentity)
{
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (const auto& p : {make_scalar_params(1.5, 0.3, Variant::FMM), make_scalar_params(0.9, 0.3, Variant::AMS)}) {
        const AMatrices A = A_matrices(0.1, p);
        for (int t = 0; t < 50; ++t) {
            const MaxMinQuery q{U(gen), U(gen), 3 * U(gen), 3 * U(gen), 0.1};
            EXPECT_NEAR(A.evaluate(q), L_value(q, p), 1e-8);
        }
    }
}

TEST(AMatrices, ClosedFormsAtZero)
{
    for (const auto& p : both_grids()) {
        const AMatrices qd = A_matrices(0.0, p), cf = A_matrices_closed_form(p);
        EXPECT_LE((qd.A11 - cf.A11).cwiseAbs().maxCoeff(), 1e-8) << p.lambda;
        EXPECT_LE((qd.A12 - cf.A12).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LE((qd.A22 - cf.A22).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_NEAR(qd.constant, 0.0, 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(qd.A22);
        EXPECT_GT(es.eigenvalues()[0], 0.0);
    }
}

TEST(Ibp, IdentitiesHold)
{
    for (const auto& p : both_grids())
        for (double r : ibp_identities(p)) EXPECT_LE(r, 1e-7) << p.lambda;
}

TEST(Schur, VerdictAcrossGrids)
{
    for (const auto& p : both_grids()) {
        const SchurCertificate s = schur_certificate(p);
        EXPECT_TRUE(s.chain_ok) << p.lambda;
        EXPECT_GT(s.c2, 0.0);
        EXPECT_LT(s.schur, 0.0);
        EXPECT_TRUE(s.verdict);
        EXPECT_TRUE(s.a22_positive);
        EXPECT_NEAR(s.schur, s.schur_expanded, 1e-8 * std::max(1.0, std::abs(s.schur)));
        EXPECT_LE(s.block_residual, 1e-8);
        EXPECT_LE(s.quadrature_residual, 1e-6);
    }
}

TEST(Margin, PositiveForFmmWithWeakInit)
{
    const ScalarParams p = make_scalar_params(1.5, 0.1, Variant::FMM);
    MarginOptions o;
    o.grid = 81;
    const MarginResult r = margin_search(p, default_alpha_grid(), o);
    ASSERT_EQ(r.rows.size(), 31u);
    EXPECT_NEAR(r.rows.front().margin, 0.0, 1e-10);
    EXPECT_TRUE(r.success);
    EXPECT_GT(r.margin_c, 0.0);
    EXPECT_GT(r.alpha_v_star, 0.0);
    EXPECT_LE(r.alpha_v_star, 0.3 + 1e-12);

    // local maximality of the origin at alpha_v*
    const AMatrices A = A_matrices(r.alpha_v_star, p);
    const MarginRow row = margin_row(A, o);
    EXPECT_TRUE(row.at_origin);
    EXPECT_LT(envelope(A, 0.05, 0.05, row.box), envelope(A, 0.0, 0.0, row.box));
}

TEST(Margin, InnerMinimizerIsExact)
{
    const ScalarParams p = make_scalar_params(2.0, 0.3, Variant::FMM);
    const AMatrices A = A_matrices(0.1, p);
    Eigen::Vector2d arg;
    const double v = inner_min(A, 0.4, -0.3, 10.0, &arg);
    // brute force over a fine grid of the box
    double best = 1e300;
    for (int i = -400; i <= 400; ++i)
        for (int j = -400; j <= 400; ++j) {
            const Eigen::Vector2d a(i / 40.0, j / 40.0);
            const Eigen::Vector2d z(0.4, -0.3);
            best = std::min(best, a.dot(A.A22 * a) + 2 * z.dot(A.A12 * a));
        }
    EXPECT_LE(v, best + 1e-12);
    EXPECT_GE(v, best - 1e-2);
}

TEST(ScalarParamsCheck, Regimes)
{
    EXPECT_THROW(make_scalar_params(1.5, 0.0, Variant::AMS), RegimeError);
    EXPECT_THROW(make_scalar_params(0.9, 0.3, Variant::FMM), RegimeError);
}
