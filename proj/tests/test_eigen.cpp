#include <cmath>

#include <gtest/gtest.h>

#include "tapscope/eigen_solvers.hpp"

using namespace tapscope;

namespace {

Eigen::MatrixXd random_symmetric(int n, unsigned seed)
{
    std::srand(seed);
    Eigen::MatrixXd A = Eigen::MatrixXd::Random(n, n);
    return 0.5 * (A + A.transpose());
}

}  // namespace

TEST(Multiply, MatchesProductAtAllWidths)
{
    const Eigen::MatrixXd A = Eigen::MatrixXd::Random(300, 300);
    for (int c : {1, 3, 4, 5, 17, 64}) {
        const Eigen::MatrixXd X = Eigen::MatrixXd::Random(300, c);
        Eigen::MatrixXd Y;
        multiply(A, X, Y);
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(300, c);
        for (int j = 0; j < c; ++j)
            for (int k = 0; k < 300; ++k) R.col(j) += A.col(k) * X(k, j);
        EXPECT_LE((Y - R).norm(), 1e-12 * R.norm()) << c;
    }
}

TEST(Lobpcg, DiagonalSpectrum)
{
    const int n = 400;
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = 1.0 + i;
    d[123] = -0.5;
    BlockOp op = [&](const Eigen::MatrixXd& X, Eigen::MatrixXd& AX) { AX = d.asDiagonal() * X; };
    LobpcgOptions o;
    o.tol = 1e-10;
    o.max_iter = 3000;  // unpreconditioned, condition number ~270
    const EigResult r = lobpcg_smallest(op, n, Eigen::VectorXd::Ones(n), nullptr, o);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, -0.5, 1e-12);
    EXPECT_NEAR(std::abs(r.vector[123]), 1.0, 1e-8);
}

TEST(Lobpcg, RandomSymmetricAgainstDense)
{
    const Eigen::MatrixXd A = random_symmetric(250, 3);
    const EigResult dense = dense_smallest(A);
    BlockOp op = [&](const Eigen::MatrixXd& X, Eigen::MatrixXd& AX) { AX = A * X; };
    LobpcgOptions o;
    o.tol = 1e-9;
    o.max_iter = 3000;
    const EigResult r = lobpcg_smallest(op, 250, Eigen::VectorXd::Ones(250), nullptr, o);
    EXPECT_NEAR(r.value, dense.value, 1e-8);
    EXPECT_LE((A * r.vector - r.value * r.vector).norm(), 1e-7);
    EXPECT_NEAR(dense_largest(A).value, -dense_smallest(-A).value, 1e-12);
}

TEST(Lobpcg, BatchEqualsIndividual)
{
    const Eigen::MatrixXd A = random_symmetric(200, 4), B = random_symmetric(200, 5);
    const std::vector<const Eigen::MatrixXd*> mats{&A, &B};
    BatchOp op = [&](const std::vector<int>& active, const std::vector<const Eigen::MatrixXd*>& Xs,
                     std::vector<Eigen::MatrixXd>& AXs) {
        AXs.resize(active.size());
        for (std::size_t i = 0; i < active.size(); ++i) AXs[i] = *mats[active[i]] * *Xs[i];
    };
    LobpcgOptions o;
    o.tol = 1e-9;
    o.max_iter = 3000;
    const auto rs = lobpcg_smallest_batch(op, 200, 2, {Eigen::VectorXd::Ones(200), Eigen::VectorXd::Ones(200)},
                                          {nullptr, nullptr}, o);
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_NEAR(rs[0].value, dense_smallest(A).value, 1e-8);
    EXPECT_NEAR(rs[1].value, dense_smallest(B).value, 1e-8);
}

TEST(Pcg, SolvesSpdSystem)
{
    const int n = 150;
    Eigen::MatrixXd M = Eigen::MatrixXd::Random(n, n);
    const Eigen::MatrixXd A = M * M.transpose() + n * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd b = Eigen::VectorXd::Random(n);
    BlockOp op = [&](const Eigen::MatrixXd& X, Eigen::MatrixXd& AX) { AX = A * X; };
    const CgResult r = pcg(op, b, A.diagonal().cwiseInverse(), 1e-12, 500);
    EXPECT_TRUE(r.converged);
    EXPECT_LE((A * r.x - b).norm(), 1e-11 * b.norm());
}
