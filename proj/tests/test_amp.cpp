#include <cmath>

#include <gtest/gtest.h>

#include "tapscope/amp.hpp"
#include "tapscope/errors.hpp"
#include "tapscope/rng.hpp"

using namespace tapscope;

TEST(Goe, VarianceConvention)
{
    const int n = 400;
    const Eigen::MatrixXd W = sample_goe(n, 5);
    EXPECT_EQ((W - W.transpose()).cwiseAbs().maxCoeff(), 0.0);
    double off = 0.0, dia = 0.0;
    for (int j = 0; j < n; ++j) {
        dia += W(j, j) * W(j, j);
        for (int i = 0; i < j; ++i) off += W(i, j) * W(i, j);
    }
    EXPECT_NEAR(off / (n * (n - 1) / 2.0) * n, 1.0, 0.02);
    EXPECT_NEAR(dia / n * n, 2.0, 0.3);
    // spectral edge near 2
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
    EXPECT_NEAR(es.eigenvalues().maxCoeff(), 2.0, 0.15);
    EXPECT_EQ(sample_goe(n, 5), W);
    EXPECT_NE(sample_goe(n, 6), W);
}

TEST(Instance, SideChannelAndSpike)
{
    ModelParams p;
    p.n = 300;
    p.lambda = 1.5;
    p.gamma0 = 0.3;
    const ModelInstance inst = make_instance(p, 9);
    EXPECT_EQ(inst.x, Eigen::VectorXd::Ones(300));
    EXPECT_LE((inst.Y - (1.5 / 300) * inst.x * inst.x.transpose() - inst.W).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((inst.y - (0.3 * inst.x + std::sqrt(0.3) * inst.g_side)).cwiseAbs().maxCoeff(), 1e-15);

    p.fix_spike_to_ones = false;
    const ModelInstance r = make_instance(p, 9);
    for (int i = 0; i < 300; ++i) EXPECT_EQ(std::abs(r.x[i]), 1.0);
    EXPECT_LT(std::abs(r.x.sum()), 300.0);

    ModelParams bad = p;
    bad.lambda = -1;
    EXPECT_THROW(make_instance(bad, 1), DomainError);
    bad = p;
    bad.n = 1;
    EXPECT_THROW(make_instance(bad, 1), DomainError);
}

TEST(Rng, SubstreamsIndependentOfEachOther)
{
    auto a = substream(1, "goe"), b = substream(1, "goe"), c = substream(1, "spike"), d = substream(2, "goe");
    const auto va = a(), vb = b(), vc = c(), vd = d();
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);
    EXPECT_NE(va, vd);
}

TEST(Amp, UpdateIdentity)
{
    // z^{s+1} = lambda Y m^s + chi y - lambda bhat_s m^{s-1}, and g^{s+1} is its W part
    for (Variant v : {Variant::AMS, Variant::FMM}) {
        ModelParams p;
        p.n = 500;
        p.variant = v;
        const ModelInstance inst = make_instance(p, 2);
        const AmpTrace tr = run_amp_z2(inst, 6);
        const double lam = p.lambda, ch = chi(v);
        for (int s = 0; s < 6; ++s) {
            const Eigen::VectorXd m = tr.M.col(s);
            EXPECT_LE((m - tr.Z.col(s).array().tanh().matrix()).cwiseAbs().maxCoeff(), 0.0);
            EXPECT_NEAR(tr.onsager[s], lam * (1 - m.squaredNorm() / p.n), 1e-15);
            const Eigen::VectorXd spike = (lam * lam / p.n) * inst.x.dot(m) * inst.x;
            EXPECT_LE((tr.Z.col(s + 1) - tr.G.col(s) - spike - ch * inst.y).cwiseAbs().maxCoeff(), 1e-12);
        }
        EXPECT_EQ(tr.Z.col(0), inst.y);
    }
}

TEST(Amp, TracksStateEvolution)
{
    for (Variant v : {Variant::AMS, Variant::FMM}) {
        ModelParams p;
        p.n = 3000;
        p.variant = v;
        const ModelInstance inst = make_instance(p, 1);
        const AmpTrace tr = run_amp_z2(inst, 12);
        const SeCurve c = run_recursion(p.lambda, p.gamma0, chi(v), 12);
        const SeSample smp = sample_se(c, p.n, 4);
        const SeDiscrepancy d = empirical_vs_se(tr, inst, c, smp);
        EXPECT_LE(d.max_q_gap, 0.05) << to_string(v);
        EXPECT_LE(d.max_overlap_gap, 0.05);
        EXPECT_LE(d.max_onsager_gap, 0.08);
        EXPECT_LE(d.sliced_w2, 0.15);
        const Eigen::MatrixXd Kj = joint_covariance(c);
        const SeDiscrepancy dj = empirical_vs_se(tr, inst, c, smp, &Kj);
        EXPECT_LE(dj.gg_gap, 0.12);
    }
}

TEST(Amp, RejectsBadK)
{
    ModelParams p;
    p.n = 50;
    EXPECT_THROW(run_amp_z2(make_instance(p, 1), 0), DomainError);
}

TEST(GenericAmp, LinearDenoiserMatchesSe)
{
    // f_s = g_s: b_{ss} = 1, g^{s+1} = W g^s - g^{s-1}
    const int n = 2000, k = 5;
    std::vector<Denoiser> f;
    for (int s = 0; s < k; ++s) f.push_back([](const double* g, int s) { return g[s]; });
    const GenericSe se = generic_se(f, k, 50000, 1);
    // single instances fluctuate by O(1/sqrt(n)) times the spread of U_k^2 on
    // the semicircle, so average the Gram matrix over a few of them
    Eigen::MatrixXd GG = Eigen::MatrixXd::Zero(k, k);
    for (std::uint64_t seed = 3; seed < 7; ++seed) {
        const Eigen::MatrixXd W = sample_goe(n, seed);
        auto gen = substream(seed, "g0");
        const Eigen::VectorXd g0 = normal_vector(gen, n);
        const GenericTrace tr = run_amp_generic(f, se.onsager, W, g0, k);
        ASSERT_EQ(tr.G.cols(), k + 1);
        GG += tr.G.rightCols(k).transpose() * tr.G.rightCols(k) / (4.0 * n);
    }
    EXPECT_LE((GG - se.K).cwiseAbs().maxCoeff(), 0.1);
    for (int s = 1; s < k; ++s) EXPECT_NEAR(se.onsager(s, s), 1.0, 1e-8);
}

TEST(SlicedW2, Basics)
{
    auto gen = substream(1, "cloud");
    Eigen::MatrixXd A(500, 3);
    for (int j = 0; j < 3; ++j) A.col(j) = normal_vector(gen, 500);
    EXPECT_NEAR(sliced_w2(A, A, 32, 1), 0.0, 1e-15);
    Eigen::MatrixXd B = A;
    B.col(0).array() += 1.0;
    // shifting along e1 by 1: W2^2 along direction theta is theta_1^2, mean 1/3
    EXPECT_NEAR(sliced_w2(A, B, 4000, 2), std::sqrt(1.0 / 3.0), 0.02);
    EXPECT_THROW(sliced_w2(A, A.leftCols(2), 4, 1), DomainError);
}
