#include <cmath>

#include <gtest/gtest.h>

#include "tapscope/errors.hpp"
#include "tapscope/state_evolution.hpp"

using namespace tapscope;

// Reference values from an independent adaptive-quadrature solver (scipy quad +
// brentq on gamma = lambda^2 E tanh^2(gamma + sqrt(gamma) G) + chi gamma0).
struct FpCase {
    Variant v;
    double lambda, gamma0;
    double gamma, q, b;
};

const FpCase kFixedPoints[] = {
    {Variant::FMM, 1.1, 0.3, 0.231997872868917, 0.19173377923051, 0.0759733399174369},
    {Variant::FMM, 1.5, 0.3, 1.557662973634, 0.692294654948445, 0.587657459773426},
    {Variant::FMM, 2.0, 0.3, 3.66604404415121, 0.916511011037803, 0.882376411203658},
    {Variant::FMM, 3.0, 0.3, 8.96185511995993, 0.995761679995547, 0.993834643605869},
    {Variant::AMS, 0.5, 0.1, 0.12871597815856, 0.114863912634238, 0.0309065740324397},
    {Variant::AMS, 0.5, 0.3, 0.369838637795915, 0.27935455118366, 0.142972262429865},
    {Variant::AMS, 0.9, 0.1, 0.282973423098348, 0.225893114936232, 0.100380006903197},
    {Variant::AMS, 0.9, 0.3, 0.635399564119147, 0.414073535949565, 0.269154139038855},
    {Variant::AMS, 1.5, 0.1, 1.73261188283527, 0.725605281260121, 0.629593842535204},
    {Variant::AMS, 1.5, 0.3, 2.0448287142396, 0.775479428550934, 0.693631885865592},
};

TEST(FixedPoint, MatchesReferenceSolver)
{
    for (const auto& c : kFixedPoints) {
        const FixedPointConstants fp = solve_fixed_point(c.lambda, c.gamma0, chi(c.v));
        EXPECT_NEAR(fp.gamma_inf, c.gamma, 1e-9 * c.gamma) << to_string(c.v) << ' ' << c.lambda;
        EXPECT_NEAR(fp.q_inf, c.q, 1e-9);
        EXPECT_NEAR(fp.b_inf, c.b, 1e-9);
    }
}

TEST(FixedPoint, IdentitiesAndStability)
{
    for (const auto& c : kFixedPoints) {
        const FixedPointConstants fp = solve_fixed_point(c.lambda, c.gamma0, chi(c.v));
        EXPECT_LE(std::abs(fp.residual), 1e-10);
        EXPECT_LE(std::abs(fp.q_identity_residual), 1e-8);
        EXPECT_LE(std::abs(fp.b_identity_residual), 1e-8);
        EXPECT_LT(c.lambda * c.lambda * (1.0 - fp.q_inf), 1.0);
        EXPECT_GT(fp.q_inf, 0.0);
        EXPECT_LT(fp.q_inf, 1.0);
        EXPECT_GT(fp.q_inf, fp.b_inf);
    }
}

TEST(FixedPoint, RegimeErrors)
{
    EXPECT_THROW(solve_fixed_point(0.9, 0.3, 0.0), RegimeError);
    EXPECT_THROW(solve_fixed_point(1.0, 0.3, 0.0), RegimeError);
    EXPECT_THROW(solve_fixed_point(1.5, 0.0, 1.0), RegimeError);
}

TEST(Recursion, MatchesReferenceCurve)
{
    const double ams[] = {0.3,
                          0.832845596763843,
                          1.41027935893539,
                          1.78641706254027,
                          1.95378925916975,
                          2.01464688164857,
                          2.03503650290985,
                          2.04167444967421,
                          2.04381502902867,
                          2.04450319105495,
                          2.04472420470621,
                          2.04479516395362,
                          2.04481794399081};
    const double fmm[] = {0.3,
                          0.532845596763843,
                          0.82451693834735,
                          1.10338651917348,
                          1.3089173351835,
                          1.43250900183414,
                          1.4976832488068,
                          1.52962886148889,
                          1.54471800827929,
                          1.5517194946325,
                          1.55494130310253,
                          1.55641816061695,
                          1.55709394830603};
    const SeCurve a = run_recursion(1.5, 0.3, 1.0, 12);
    const SeCurve f = run_recursion(1.5, 0.3, 0.0, 12);
    ASSERT_EQ(a.gammas.size(), 13u);
    for (int s = 0; s <= 12; ++s) {
        EXPECT_NEAR(a.gammas[s], ams[s], 1e-10);
        EXPECT_NEAR(f.gammas[s], fmm[s], 1e-10);
    }
}

TEST(Recursion, MonotoneAndCovarianceStructure)
{
    const SeCurve c = run_recursion(1.5, 0.3, 1.0, 12);
    for (std::size_t s = 1; s < c.gammas.size(); ++s) EXPECT_GT(c.gammas[s], c.gammas[s - 1]);
    for (std::size_t s = 1; s < c.overlaps.size(); ++s) EXPECT_GT(c.overlaps[s], c.overlaps[s - 1]);
    // K_st = gamma_{min(s,t)} - chi gamma0, q_s = (gamma_{s+1} - chi gamma0)/lambda^2
    for (int s = 0; s < 12; ++s) {
        EXPECT_NEAR(c.overlaps[s], (c.gammas[s + 1] - 0.3) / 2.25, 1e-15);
        for (int t = 0; t < 12; ++t) EXPECT_DOUBLE_EQ(c.K(s, t), c.gammas[std::min(s, t) + 1] - 0.3);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.K);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(JointCovariance, EqualsClosedFormForAms)
{
    const SeCurve c = run_recursion(1.5, 0.3, 1.0, 8);
    const Eigen::MatrixXd K = joint_covariance(c);
    EXPECT_LE((K - c.K).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(JointCovariance, FmmFirstRowFactorizes)
{
    // M_0 = tanh(gamma0 + sqrt(gamma0) G0) is independent of G_t for FMM, so
    // K_{1,t+1} = lambda^2 E[M_0] E[M_t] = gamma_1 gamma_{t+1} / lambda^2 for t >= 1
    // (entry 0 of ref is gamma_1^2 / lambda^2 and is not a K entry).
    const double ref[] = {0.126188635551385, 0.195262320024707, 0.261304288120078, 0.309978150480175,
                          0.339247161756395};
    const SeCurve c = run_recursion(1.5, 0.3, 0.0, 6);
    const Eigen::MatrixXd K = joint_covariance(c);
    EXPECT_NEAR(K(0, 0), c.gammas[1], 1e-8);
    for (int t = 1; t < 5; ++t) EXPECT_NEAR(K(0, t), ref[t], 1e-8) << t;
    for (int t = 1; t < 6; ++t) EXPECT_NEAR(K(t, t), c.K(t, t), 1e-8);
}

TEST(SeSample, MomentsMatchCurve)
{
    const SeCurve c = run_recursion(1.5, 0.3, 1.0, 6);
    const SeSample s = sample_se(c, 200000, 11);
    ASSERT_EQ(s.M.rows(), 200000);
    const Eigen::MatrixXd GG = s.G.transpose() * s.G / 200000.0;
    EXPECT_LE((GG - c.K).cwiseAbs().maxCoeff(), 0.03);
    for (int t = 0; t < 6; ++t) EXPECT_NEAR(s.M.col(t).mean(), c.overlaps[t], 0.01);
    // deterministic
    const SeSample s2 = sample_se(c, 1000, 11), s3 = sample_se(c, 1000, 11);
    EXPECT_EQ(s2.M, s3.M);
}

TEST(GenericSe, OnsagerVanishesWithoutDependence)
{
    // f_s depends on G_s only: b_{sj} = 0 for j < s
    std::vector<Denoiser> f;
    for (int s = 0; s < 4; ++s) f.push_back([](const double* g, int s) { return std::tanh(1.0 + g[s]); });
    const GenericSe se = generic_se(f, 4, 40000, 3);
    for (int s = 0; s < 4; ++s)
        for (int j = 0; j < s; ++j) EXPECT_NEAR(se.onsager(s, j), 0.0, 1e-8);
    for (int s = 1; s < 4; ++s) EXPECT_GT(se.onsager(s, s), 0.0);
}
