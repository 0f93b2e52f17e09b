#include "tapscope/eigen_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tapscope/errors.hpp"

namespace tapscope {

namespace {

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& X)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    return qr.householderQ() * Eigen::MatrixXd::Identity(X.rows(), X.cols());
}

// One LOBPCG problem as a state machine: request() hands out the block that
// needs multiplying, receive() takes A times it and advances.
class Lobpcg {
public:
    Lobpcg(Eigen::Index n, const Eigen::VectorXd& precond, const Eigen::VectorXd* x0, const LobpcgOptions& opt,
           unsigned seed)
        : n_(n), opt_(opt), precond_(precond)
    {
        if (precond.size() != n) throw DomainError("lobpcg: preconditioner size mismatch");
        b_ = static_cast<int>(std::min<Eigen::Index>(std::max(opt.block, 1), std::max<Eigen::Index>(1, n / 3)));
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> nd;
        X_.resize(n, b_);
        for (Eigen::Index j = 0; j < b_; ++j)
            for (Eigen::Index i = 0; i < n; ++i) X_(i, j) = nd(gen);
        if (x0 && x0->size() == n && x0->norm() > 0) X_.col(0) = *x0;
        X_ = orthonormal_columns(X_);
        P_.resize(n, 0);
        AP_.resize(n, 0);
        phase_ = Phase::Init;
    }

    bool done() const { return phase_ == Phase::Done; }

    const Eigen::MatrixXd& request() const { return phase_ == Phase::Expand ? W_ : X_; }

    void receive(const Eigen::MatrixXd& AZ)
    {
        res_.matvecs += static_cast<int>(AZ.cols());
        if (phase_ == Phase::Init) {
            AX_ = AZ;
            rayleigh_ritz_x();
        } else {
            expand(AZ);
        }
        advance();
    }

    EigResult result() const
    {
        EigResult r = res_;
        r.value = theta_[0];
        r.vector = X_.col(0) / X_.col(0).norm();
        return r;
    }

private:
    enum class Phase { Init, Expand, Done };

    void rayleigh_ritz_x()
    {
        Eigen::MatrixXd H = X_.transpose() * AX_;
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        X_ = X_ * es.eigenvectors();
        AX_ = AX_ * es.eigenvectors();
        theta_.resize(b_);
        for (int j = 0; j < b_; ++j) theta_[j] = X_.col(j).dot(AX_.col(j));
        P_.resize(n_, 0);
        AP_.resize(n_, 0);
    }

    // convergence test, then either finish, refresh, or build the next W
    void advance()
    {
        R_ = AX_ - X_ * theta_.asDiagonal();
        const double r0 = R_.col(0).norm();
        res_.value = theta_[0];
        res_.residual = r0;
        if (r0 <= opt_.tol * std::max(1.0, std::abs(theta_[0]))) {
            res_.converged = true;
            phase_ = Phase::Done;
            return;
        }
        if (res_.iterations >= opt_.max_iter) {
            phase_ = Phase::Done;
            return;
        }
        ++res_.iterations;
        if (res_.iterations % 25 == 0) {
            // refresh so the recurrences for AX do not drift
            X_ = orthonormal_columns(X_);
            phase_ = Phase::Init;
            return;
        }
        W_ = precond_.asDiagonal() * R_;
        W_ -= X_ * (X_.transpose() * W_);
        for (int j = 0; j < b_; ++j) {
            double nw = W_.col(j).norm();
            if (nw > 0) W_.col(j) /= nw;
        }
        phase_ = Phase::Expand;
    }

    void expand(const Eigen::MatrixXd& AW)
    {
        const Eigen::Index np = P_.cols();
        Eigen::MatrixXd S(n_, 2 * b_ + np), AS(n_, 2 * b_ + np);
        S << X_, W_, P_;
        AS << AX_, AW, AP_;
        Eigen::MatrixXd Gm = S.transpose() * S;
        Eigen::MatrixXd Hs = S.transpose() * AS;
        Gm = 0.5 * (Gm + Gm.transpose()).eval();
        Hs = 0.5 * (Hs + Hs.transpose()).eval();

        // orthonormalize the trial space through the Gram matrix, dropping
        // near-dependent directions
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(Gm);
        const Eigen::VectorXd& gl = eg.eigenvalues();
        const double gmax = gl.maxCoeff();
        std::vector<int> keep;
        for (int j = 0; j < gl.size(); ++j)
            if (gl[j] > 1e-12 * gmax) keep.push_back(j);
        Eigen::MatrixXd Bm(Gm.rows(), keep.size());
        for (std::size_t j = 0; j < keep.size(); ++j)
            Bm.col(j) = eg.eigenvectors().col(keep[j]) / std::sqrt(gl[keep[j]]);
        Eigen::MatrixXd Hr = Bm.transpose() * Hs * Bm;
        Hr = 0.5 * (Hr + Hr.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(Hr);
        Eigen::MatrixXd C = Bm * er.eigenvectors().leftCols(b_);

        Eigen::MatrixXd Xn = S * C;
        Eigen::MatrixXd AXn = AS * C;
        const Eigen::Index rest = S.cols() - b_;
        P_ = S.rightCols(rest) * C.bottomRows(rest);
        AP_ = AS.rightCols(rest) * C.bottomRows(rest);
        X_ = std::move(Xn);
        AX_ = std::move(AXn);
        theta_ = er.eigenvalues().head(b_);
    }

    Eigen::Index n_;
    int b_ = 1;
    LobpcgOptions opt_;
    Eigen::VectorXd precond_;
    Eigen::MatrixXd X_, AX_, P_, AP_, W_, R_;
    Eigen::VectorXd theta_;
    EigResult res_;
    Phase phase_;
};

}  // namespace

void multiply(const Eigen::MatrixXd& A, const Eigen::MatrixXd& X, Eigen::MatrixXd& AX)
{
    AX.resize(A.rows(), X.cols());
    // Eigen's gemm is slow for 2-4 columns; gemv per column is faster there
    if (X.cols() <= 4) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) AX.col(j).noalias() = A * X.col(j);
    } else {
        AX.noalias() = A * X;
    }
}

std::vector<EigResult> lobpcg_smallest_batch(const BatchOp& A, Eigen::Index n, int m,
                                             const std::vector<Eigen::VectorXd>& preconds,
                                             const std::vector<const Eigen::VectorXd*>& x0s,
                                             const LobpcgOptions& opt, unsigned seed)
{
    if (static_cast<int>(preconds.size()) != m || static_cast<int>(x0s.size()) != m)
        throw DomainError("lobpcg_smallest_batch: need one preconditioner and start per problem");
    std::vector<Lobpcg> probs;
    probs.reserve(m);
    for (int j = 0; j < m; ++j) probs.emplace_back(n, preconds[j], x0s[j], opt, seed);

    std::vector<int> active;
    std::vector<const Eigen::MatrixXd*> Xs(m, nullptr);
    std::vector<Eigen::MatrixXd> AXs(m);
    for (;;) {
        active.clear();
        for (int j = 0; j < m; ++j)
            if (!probs[j].done()) active.push_back(j);
        if (active.empty()) break;
        for (int j : active) Xs[j] = &probs[j].request();
        A(active, Xs, AXs);
        for (int j : active) probs[j].receive(AXs[j]);
    }
    std::vector<EigResult> out;
    out.reserve(m);
    for (auto& p : probs) out.push_back(p.result());
    return out;
}

EigResult lobpcg_smallest(const BlockOp& A, Eigen::Index n, const Eigen::VectorXd& precond,
                          const Eigen::VectorXd* x0, const LobpcgOptions& opt, unsigned seed)
{
    BatchOp batch = [&A](const std::vector<int>&, const std::vector<const Eigen::MatrixXd*>& Xs,
                         std::vector<Eigen::MatrixXd>& AXs) {
        AXs[0].resize(Xs[0]->rows(), Xs[0]->cols());
        A(*Xs[0], AXs[0]);
    };
    return lobpcg_smallest_batch(batch, n, 1, {precond}, {x0}, opt, seed)[0];
}

EigResult dense_smallest(const Eigen::MatrixXd& A)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw InvariantError("dense eigensolver failed");
    EigResult r;
    r.value = es.eigenvalues()[0];
    r.vector = es.eigenvectors().col(0);
    r.residual = (A * r.vector - r.value * r.vector).norm();
    r.converged = true;
    return r;
}

EigResult dense_largest(const Eigen::MatrixXd& A)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw InvariantError("dense eigensolver failed");
    EigResult r;
    const Eigen::Index last = A.rows() - 1;
    r.value = es.eigenvalues()[last];
    r.vector = es.eigenvectors().col(last);
    r.residual = (A * r.vector - r.value * r.vector).norm();
    r.converged = true;
    return r;
}

CgResult pcg(const BlockOp& A, const Eigen::VectorXd& b, const Eigen::VectorXd& precond,
             double rel_tol, int max_iter, const Eigen::VectorXd* x0)
{
    const Eigen::Index n = b.size();
    CgResult out;
    out.x = x0 ? *x0 : Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd xin(n, 1), Ax(n, 1);
    xin.col(0) = out.x;
    A(xin, Ax);
    Eigen::VectorXd r = b - Ax.col(0);
    const double bn = b.norm();
    if (bn == 0.0) {
        out.x.setZero();
        out.converged = true;
        return out;
    }
    Eigen::VectorXd z = precond.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    Eigen::MatrixXd pin(n, 1), Ap(n, 1);
    for (int it = 0; it < max_iter; ++it) {
        out.rel_residual = r.norm() / bn;
        if (out.rel_residual <= rel_tol) {
            out.converged = true;
            out.iterations = it;
            return out;
        }
        pin.col(0) = p;
        A(pin, Ap);
        double pAp = p.dot(Ap.col(0));
        if (!(pAp > 0.0)) break;  // not SPD along p
        double alpha = rz / pAp;
        out.x += alpha * p;
        r -= alpha * Ap.col(0);
        z = precond.cwiseProduct(r);
        double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        out.iterations = it + 1;
    }
    out.rel_residual = r.norm() / bn;
    out.converged = out.rel_residual <= rel_tol;
    return out;
}

}  // namespace tapscope
