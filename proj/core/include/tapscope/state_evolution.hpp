#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "tapscope/model.hpp"

namespace tapscope {

inline constexpr int kDefaultQuadratureOrder = 200;

struct SeCurve {
    double lambda = 0.0;
    double gamma0 = 0.0;
    double chi = 0.0;
    int k = 0;
    int quadrature_order = kDefaultQuadratureOrder;  // order actually used
    std::vector<double> gammas;    // gamma_0 .. gamma_k
    std::vector<double> overlaps;  // q_s = (gamma_{s+1} - chi gamma0)/lambda^2, s = 0..k-1
    Eigen::MatrixXd K;             // K_st = gamma_{s^t} - chi gamma0 (1-based s,t)
    Eigen::MatrixXd Gamma;         // Gamma_st = gamma_{s^t}
};

struct FixedPointConstants {
    double gamma_inf = 0.0;
    double q_inf = 0.0;
    double b_inf = 0.0;
    double K_inf = 0.0;
    double residual = 0.0;
    double q_identity_residual = 0.0;  // q_inf - E tanh
    double b_identity_residual = 0.0;  // b_inf - E tanh^3
    int iterations = 0;
    bool used_bisection = false;
    int quadrature_order = 0;
};

struct SeSample {
    int N = 0;
    Eigen::MatrixXd M;  // N x k, columns M_0..M_{k-1}
    Eigen::MatrixXd G;  // N x k, columns G_1..G_k
    Eigen::VectorXd G0;
    Eigen::VectorXd Xi;
};

// lambda^2 E tanh^2(gamma + sqrt(gamma) G) + chi gamma0
double se_map(double lambda, double gamma0, double chi, double gamma, int order);

SeCurve run_recursion(double lambda, double gamma0, double chi, int k,
                      int order = kDefaultQuadratureOrder);

FixedPointConstants solve_fixed_point(double lambda, double gamma0, double chi,
                                      int order = kDefaultQuadratureOrder);

// Covariance of (N_s, N_t) where M_s = tanh(gamma_s + N_s), built from a
// covariance K of (G_1..G_k):  N_0 = sqrt(gamma0) G0,  N_s = G_s + chi sqrt(gamma0) G0.
Eigen::Matrix2d noise_covariance(const SeCurve& c, const Eigen::MatrixXd& K, int s, int t);

// lambda^2 E[M_s M_t] by 2-d Gauss-Hermite under the law induced by K.
double cross_moment(const SeCurve& c, const Eigen::MatrixXd& K, int s, int t, int order);

// Covariance of (g^1..g^k) predicted by the general recursion
// K_{s+1,t+1} = lambda^2 E[M_s M_t], built entry by entry. Equals c.K for AMS;
// for FMM the first iterate M_0 = tanh(y) is independent of G_t, and the
// off-diagonal entries differ from gamma_{s^t}.
// `order` is the base node count, raised with the variance of each pair.
Eigen::MatrixXd joint_covariance(const SeCurve& c, int order = 96);

SeSample sample_se(const SeCurve& c, int N, std::uint64_t seed);
SeSample sample_se(const SeCurve& c, const Eigen::MatrixXd& K, int N, std::uint64_t seed);

// f_s(G_0..G_s): g points at s+1 values.
using Denoiser = std::function<double(const double* g, int s)>;

struct GenericSe {
    Eigen::MatrixXd K;        // k x k, covariance of (G_1..G_k)
    Eigen::MatrixXd onsager;  // k x k, onsager(s, j) = E d f_s / d G_j, j <= s (j = 0 is G_0)
};

GenericSe generic_se(const std::vector<Denoiser>& f, int k, int N, std::uint64_t seed,
                     double h = 1e-5);

}  // namespace tapscope
