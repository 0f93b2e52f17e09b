#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "tapscope/model.hpp"
#include "tapscope/state_evolution.hpp"

namespace tapscope {

// Fixed-point scalars feeding the scalar certificate. G_inf ~ N(0, lambda^2 q_inf),
// M_inf = tanh(gamma_inf + G_inf + chi sqrt(gamma0) G0).
struct ScalarParams {
    double lambda = 0.0;
    double gamma0 = 0.0;
    double chi = 0.0;
    double gamma_inf = 0.0;
    double q_inf = 0.0;
    double b_inf = 0.0;
    int quadrature_order = kDefaultQuadratureOrder;  // base order; raised with the variance
    int order_g = 0;   // nodes actually used for G_inf
    int order_g0 = 0;  // nodes for G0 (AMS only)
};

// Throws RegimeError where the fixed point is degenerate, InvariantError if
// the fixed-point identities fail beyond 1e-8.
ScalarParams make_scalar_params(double lambda, double gamma0, Variant v,
                                int order = kDefaultQuadratureOrder);

struct MaxMinQuery {
    double rho = 0.0;
    double u = 0.0;
    double alpha_rho = 0.0;
    double alpha_u = 0.0;
    double alpha_v = 0.0;
};

// Objective inside the sup defining Theta, at scalar v.
double theta_objective(double v, double g, double m, double xi, double u_point, const MaxMinQuery& q,
                       const ScalarParams& p);
// Closed-form sup over v. Requires alpha_v < 1 and 1/(1-u^2) > alpha_v.
double theta_closed_form(double g, double m, double xi, double u_point, const MaxMinQuery& q,
                         const ScalarParams& p);

// L_x(rho, u; alpha_rho, alpha_u, alpha_v) with Xi integrated out.
double L_value(const MaxMinQuery& q, const ScalarParams& p);

struct AMatrices {
    double alpha_v = 0.0;
    Eigen::Matrix2d A11, A12, A22;
    double constant = 0.0;  // -lambda^2(1-q) - alpha_v + lambda^2 E[D]
    Eigen::Matrix4d full() const;
    // (rho,u,alpha_rho,alpha_u)^T A (.) + constant
    double evaluate(const MaxMinQuery& q) const;
};

// D = (1/(1-M^2) - alpha_v)^{-1}; blocks by quadrature.
AMatrices A_matrices(double alpha_v, const ScalarParams& p);
// alpha_v = 0 blocks written through q_inf, b_inf.
AMatrices A_matrices_closed_form(const ScalarParams& p);

// |LHS - RHS| for E[G M], E[G M^2], E[G M^3], E[G^2 (1-M^2)].
std::array<double, 4> ibp_identities(const ScalarParams& p);

struct SchurCertificate {
    double c1 = 0.0;
    double c2 = 0.0;
    double schur = 0.0;          // c1 + q_inf c2
    double schur_expanded = 0.0; // same quantity through the expanded display
    double block_residual = 0.0;     // closed-form blocks vs the (c1, c2) matrix
    double quadrature_residual = 0.0;  // quadrature blocks vs the (c1, c2) matrix
    bool chain_ok = false;       // 1-2q+b < 1-q < 1/lambda^2
    bool a22_positive = false;
    bool verdict = false;        // c2 > 0 && schur < 0
};

SchurCertificate schur_certificate(const ScalarParams& p);

struct MarginOptions {
    double box = 10.0;  // dual box [-box, box]^2 (lower bound when adaptive)
    // widen the box to 1.5x the largest unconstrained inner minimizer over
    // (rho,u) in [-1,1]^2, so K contains every minimizer the outer sup can reach
    bool adaptive_box = true;
    int grid = 201;     // per axis over [-1,1]
    double polish_tol = 1e-10;
    double origin_tol = 1e-6;
};

struct MarginRow {
    double alpha_v = 0.0;
    double L0 = 0.0;       // L(0,0;0,0,alpha_v)
    double sup = 0.0;      // sup_{rho,u} min_{alpha in box} L
    double rho_star = 0.0;
    double u_star = 0.0;
    double alpha_rho_star = 0.0;
    double alpha_u_star = 0.0;
    bool at_origin = false;     // argmax and inner minimizer both at 0
    bool inner_interior = true; // inner minimizer strictly inside the box at the argmax
    double margin = 0.0;        // -sup
    double box = 0.0;           // half-width of the dual box used
};

struct MarginResult {
    std::vector<MarginRow> rows;
    double alpha_v_star = 0.0;
    double margin_c = 0.0;
    bool success = false;  // margin_c > 0 with the sup attained at the origin
};

std::vector<double> default_alpha_grid();  // 0, 0.01, ..., 0.3

// min over the box of the convex quadratic alpha^T A22 alpha + 2 z^T A12 alpha.
double inner_min(const AMatrices& A, double rho, double u, double box, Eigen::Vector2d* argmin = nullptr);
double envelope(const AMatrices& A, double rho, double u, double box, Eigen::Vector2d* argmin = nullptr);

// max over z in [-1,1]^2 of |A22^{-1} A21 z|_inf
double unconstrained_dual_radius(const AMatrices& A);
MarginRow margin_row(const AMatrices& A, const MarginOptions& opt = {});
MarginResult margin_search(const ScalarParams& p, const std::vector<double>& alpha_grid,
                           const MarginOptions& opt = {});

}  // namespace tapscope
