#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace tapscope {

// Block operator: AX = A * X for an n x b block X.
using BlockOp = std::function<void(const Eigen::MatrixXd& X, Eigen::MatrixXd& AX)>;

struct EigResult {
    double value = 0.0;
    Eigen::VectorXd vector;
    int iterations = 0;
    int matvecs = 0;
    double residual = 0.0;  // ||A v - value v||
    bool converged = false;
};

struct LobpcgOptions {
    int block = 2;
    int max_iter = 600;
    // on ||r|| / max(1, |theta|); the eigenvalue error is O(||r||^2 / gap)
    double tol = 1e-6;
};

// AX = A X for a dense A, choosing gemv or gemm by block width.
void multiply(const Eigen::MatrixXd& A, const Eigen::MatrixXd& X, Eigen::MatrixXd& AX);

// Applies several related operators at once: AXs[j] = A_j Xs[j], where
// `active[j]` lists which problems j are in the call. Lets problems that
// share a dense matrix do one wide product instead of many thin ones.
using BatchOp = std::function<void(const std::vector<int>& active, const std::vector<const Eigen::MatrixXd*>& Xs,
                                   std::vector<Eigen::MatrixXd>& AXs)>;

// Smallest eigenpair of a symmetric operator. `precond` is a diagonal
// preconditioner applied as elementwise product (size n, positive entries).
// `x0` (optional) warm-starts the first block column.
EigResult lobpcg_smallest(const BlockOp& A, Eigen::Index n, const Eigen::VectorXd& precond,
                          const Eigen::VectorXd* x0, const LobpcgOptions& opt = {},
                          unsigned seed = 7);

// Smallest eigenpairs of m operators run in lockstep; x0s entries may be null.
std::vector<EigResult> lobpcg_smallest_batch(const BatchOp& A, Eigen::Index n, int m,
                                             const std::vector<Eigen::VectorXd>& preconds,
                                             const std::vector<const Eigen::VectorXd*>& x0s,
                                             const LobpcgOptions& opt = {}, unsigned seed = 7);

EigResult dense_smallest(const Eigen::MatrixXd& A);
EigResult dense_largest(const Eigen::MatrixXd& A);

struct CgResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

// Preconditioned conjugate gradients for SPD A (single vector).
CgResult pcg(const BlockOp& A, const Eigen::VectorXd& b, const Eigen::VectorXd& precond,
             double rel_tol, int max_iter, const Eigen::VectorXd* x0 = nullptr);

}  // namespace tapscope
