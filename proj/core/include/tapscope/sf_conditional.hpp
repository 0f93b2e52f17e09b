#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tapscope/amp.hpp"
#include "tapscope/model.hpp"
#include "tapscope/tap.hpp"

namespace tapscope {

// Conditioning on W R = S. For an AMP trace, R = lambda M and
// S = G + lambda M B0, with B0_{s-1,s} = bhat_s (first superdiagonal).
// Projector and the maps T, T_SF are kept in factored form over an
// orthonormal basis Q of col(R):  T = T_left Q^T,  T_SF = TSF_left Q^T.
struct ConditioningData {
    int n = 0;
    int k = 0;
    double lambda = 1.0;
    Eigen::MatrixXd R, S;
    Eigen::MatrixXd B0, B_SF;
    Eigen::MatrixXd G_SF;
    Eigen::MatrixXd Q;        // n x k orthonormal basis of col(R)
    Eigen::MatrixXd R_upper;  // R = Q R_upper
    Eigen::MatrixXd TSF_left;
    Eigen::MatrixXd T_left;   // only when built from a trace
    bool has_T = false;

    double wr_residual = 0.0;     // ||W R - S||_max / (||W||_max ||R||_max)
    double rts_asymmetry = 0.0;   // ||R^T S - S^T R||_max / ||R^T S||_max
    double bdef_residual = 0.0;   // ||R^T S - R^T R B_SF - B_SF^T R^T R||_max / ||R^T S||_max
    double tsf_r_residual = 0.0;  // ||T_SF R - (S - R B_SF)||_max / ||S - R B_SF||_max
    double bsf_minus_b0_op = 0.0;
    double t_minus_tsf_op = 0.0;  // has_T only
    double min_singular_M = 0.0;

    Eigen::VectorXd apply_T(const Eigen::VectorXd& v) const;
    Eigen::VectorXd apply_TSF(const Eigen::VectorXd& v) const;
    Eigen::VectorXd project_perp(const Eigen::VectorXd& v) const;
};

// B_SF = B0 + 1/2 (R^T R)^+ (R^T S - R^T R B0 - B0^T R^T R)
Eigen::MatrixXd solve_B_SF(const Eigen::MatrixXd& R, const Eigen::MatrixXd& S, const Eigen::MatrixXd& B0,
                           double sym_tol = 1e-8);

ConditioningData build_conditioning(const Eigen::MatrixXd& W, const Eigen::MatrixXd& R,
                                    const Eigen::MatrixXd& S, const Eigen::MatrixXd& B0);
ConditioningData build_conditioning(const AmpTrace& tr, const ModelInstance& inst);

struct IdentityReport {
    double frobenius = 0.0;  // ||W - P W P - T_SF - T_SF^T||_F, P the projector onto col(R)^perp
    double relative = 0.0;   // divided by ||W||_F
    double annihilation = 0.0;  // max over random r of ||T_SF P^perp r|| / ||r||
};

IdentityReport verify_conditional_identity(const Eigen::MatrixXd& W, const ConditioningData& c,
                                           int probes = 4, std::uint64_t seed = 0);

// sqrt(n) T v + ||P^perp v|| xi
Eigen::VectorXd g_amp(const ConditioningData& c, const Eigen::VectorXd& v, const Eigen::VectorXd& xi);
// sqrt(n) T_SF v + ||P^perp v|| P^perp xi
Eigen::VectorXd g_sf(const ConditioningData& c, const Eigen::VectorXd& v, const Eigen::VectorXd& xi);

// Operator norm of A B^T for n x k factors.
double lowrank_opnorm(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

struct ComparisonOptions {
    int n_points = 5;  // probe points u, center included
    double epsilon = 0.05;
    double clip = 1e-6;
    int directions = 16;  // random unit v for the coupling gap
    EigOptions eig{};
    double s_lo = 1e-3;  // t = s sqrt(n)
    double s_hi = 1e2;
    int golden_iters = 40;
    std::uint64_t seed = 0;
};

struct SidePoint {
    std::string kind;
    double radius = 0.0;
    double goe = 0.0;       // sup_v lambda v^T W v + f_x(v,u)  = -lambda_min(n Hess F(u))
    double sf_upper = 0.0;  // min_t lambda_max(A_t)
    double sf_lower = 0.0;  // Phi(v_t*)
    double s_star = 0.0;
    std::vector<std::pair<double, double>> search;  // (s, lambda_max(A_s)) evaluations
};

struct ComparisonReport {
    double t_minus_tsf_op = 0.0;
    double bsf_minus_b0_op = 0.0;
    std::vector<SidePoint> points;
    double goe_sup = 0.0;
    double sf_upper_sup = 0.0;
    double sf_lower_sup = 0.0;
    double coupling_gap = 0.0;  // max_v ||g_AMP(v) - g_SF(v)|| / sqrt(n)
};

// SF-side objective Phi(v) = 2 lambda v^T T v + (2 lambda/sqrt n) ||P^perp v|| <xi, v> + f_x(v, u).
double sf_objective(const TapContext& ctx, const ConditioningData& c, const Eigen::VectorXd& xi,
                    const Eigen::VectorXd& u, const Eigen::VectorXd& v);

ComparisonReport compare_objectives(const TapContext& ctx, const AmpTrace& tr, const ConditioningData& c,
                                    const Eigen::VectorXd& xi, const ComparisonOptions& opt);

}  // namespace tapscope
