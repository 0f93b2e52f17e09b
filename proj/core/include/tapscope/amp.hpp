#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tapscope/model.hpp"
#include "tapscope/state_evolution.hpp"

namespace tapscope {

struct AmpTrace {
    int k = 0;
    Eigen::MatrixXd M;  // n x k, column s = m^s (s = 0..k-1)
    Eigen::MatrixXd Z;  // n x (k+1), column s = z^s, z^0 = y
    Eigen::MatrixXd G;  // n x k, column s-1 = g^s (s = 1..k)
    std::vector<double> onsager;  // bhat_0 .. bhat_{k-1}
    Variant variant = Variant::AMS;
    double lambda = 0.0;
    double gamma0 = 0.0;
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(M.rows()); }
};

// Z2 AMP. m^{-1} = 0, bhat_s = lambda (1 - Q(m^s)).
AmpTrace run_amp_z2(const ModelInstance& inst, int k);

struct GenericTrace {
    Eigen::MatrixXd M;  // n x k, m^0..m^{k-1}
    Eigen::MatrixXd G;  // n x (k+1), g^0..g^k
};

// g^{s+1} = W m^s - sum_{j=1}^s b_{sj} m^{j-1},  m^s = f_s(g^0..g^s) row-wise.
GenericTrace run_amp_generic(const std::vector<Denoiser>& f, const Eigen::MatrixXd& onsager,
                             const Eigen::MatrixXd& W, const Eigen::VectorXd& g0, int k);

// Rows (m^0..m^{k-1}, g^1..g^k, g_side, x, y) of one run.
struct EmpiricalJoint {
    Eigen::MatrixXd rows;  // n x (2k+3)
    Eigen::VectorXd mean;
    Eigen::MatrixXd second_moment;  // (1/n) rows^T rows
};

EmpiricalJoint empirical_joint(const AmpTrace& tr, const ModelInstance& inst);

// Sliced 2-Wasserstein distance between two point clouds (rows) in R^d,
// averaged in W2^2 over `directions` random unit vectors, then square-rooted.
double sliced_w2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int directions,
                 std::uint64_t seed);

struct SeDiscrepancy {
    double mm_gap = 0.0;   // max |(1/n) M^T M - K/lambda^2|
    double gg_gap = 0.0;   // max |(1/n) G^T G - K|
    double sliced_w2 = 0.0;
    double max_q_gap = 0.0;  // max_s |Q(m^s) - q_s|
    double max_overlap_gap = 0.0;  // max_s |<x, m^s>/n - q_s|
    double max_onsager_gap = 0.0;  // max_s |bhat_s - lambda (1 - q_s)|
    double max_g_mean = 0.0;       // max_s |mean(g^s)|
    double max_increment_gap = 0.0;  // max_s | ||m^s - m^{s-1}||/sqrt n - sqrt(q_s - q_{s-1}) |
    double geometry_gap = 0.0;     // max |(1/n) M^T M - (1/n) G^T G / lambda^2|
    std::vector<double> q_gap;
    std::vector<double> overlap_gap;
};

// K defaults to curve.K. `sample` rows are compared on the coordinates
// (M_0..M_{k-1}, G_1..G_k, G_0) against (m, g, g_side).
SeDiscrepancy empirical_vs_se(const AmpTrace& tr, const ModelInstance& inst, const SeCurve& curve,
                              const SeSample& sample, const Eigen::MatrixXd* K = nullptr,
                              int directions = 64, std::uint64_t seed = 0);

}  // namespace tapscope
