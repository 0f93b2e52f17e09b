#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tapscope/amp.hpp"
#include "tapscope/eigen_solvers.hpp"
#include "tapscope/model.hpp"

namespace tapscope {

struct TapContext {
    const ModelInstance* inst = nullptr;
    Variant variant = Variant::AMS;
    double q_inf = 0.0;
    double clamp_delta = 1e-9;

    TapContext() = default;
    TapContext(const ModelInstance& i, double q, double delta = 1e-9);

    double lambda() const { return inst->params.lambda; }
    int n() const { return inst->params.n; }
};

// h(m) = -(1+m)/2 log((1+m)/2) - (1-m)/2 log((1-m)/2)
double binary_entropy(double m);

double free_energy(const TapContext& ctx, const Eigen::VectorXd& m);
Eigen::VectorXd gradient(const TapContext& ctx, const Eigen::VectorXd& m);
// Same gradient written through z = atanh(m): avoids the atanh rounding
// blow-up when |m_i| is within 1e-6 of 1.
Eigen::VectorXd gradient_from_z(const TapContext& ctx, const Eigen::VectorXd& z);

// v^T (Hess F)(u) v, computed from Y directly.
double hessian_quadratic_form(const TapContext& ctx, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
// Same quantity through -(1/n)(lambda v^T W v + f_x(v, u)).
double hessian_quadratic_form_split(const TapContext& ctx, const Eigen::VectorXd& u,
                                    const Eigen::VectorXd& v);
// f_x(v, u) with <x, v> in place of <1, v>.
double f_x(const TapContext& ctx, const Eigen::VectorXd& v, const Eigen::VectorXd& u);

Eigen::MatrixXd hessian_matrix(const TapContext& ctx, const Eigen::VectorXd& u);
Eigen::MatrixXd hessian_matrix_split(const TapContext& ctx, const Eigen::VectorXd& u);

// Matrix-free n * Hess F(u).
class ScaledHessian {
public:
    ScaledHessian(const TapContext& ctx, const Eigen::VectorXd& u);
    void apply(const Eigen::MatrixXd& X, Eigen::MatrixXd& AX) const;
    BlockOp op() const;
    // AX = n Hess X given YX = Y X already formed
    void finish(const Eigen::MatrixXd& X, const Eigen::MatrixXd& YX, Eigen::MatrixXd& AX) const;
    const Eigen::VectorXd& diagonal() const { return diag_; }
    Eigen::VectorXd jacobi(double shift) const;

private:
    const TapContext* ctx_;
    Eigen::VectorXd u_;
    Eigen::VectorXd diag_;  // 1/(1-u^2) + lambda^2(1-Q) or lambda^2(1-q_inf)
    double rank1_ = 0.0;    // FMM: -2 lambda^2 / n
};

enum class EigMethod { Auto, Dense, Lobpcg };
std::string to_string(EigMethod m);
EigMethod parse_eig_method(const std::string& s);

struct EigOptions {
    EigMethod method = EigMethod::Auto;
    int dense_max_n = 400;  // Auto uses the dense solver up to this n
    LobpcgOptions lobpcg{};
    double jacobi_shift = 0.5;
};

// lambda_min(n Hess F(u)).
EigResult min_eig_scaled_hessian(const TapContext& ctx, const Eigen::VectorXd& u, const EigOptions& opt,
                                 const Eigen::VectorXd* warm = nullptr);

// Several points at once; the iterative path shares one product with Y per sweep.
std::vector<EigResult> min_eig_scaled_hessian_batch(const TapContext& ctx, const std::vector<Eigen::VectorXd>& us,
                                                    const EigOptions& opt, const Eigen::VectorXd* warm = nullptr);

struct ProbePoint {
    int id = 0;
    std::string kind;  // center | sphere | interior | toward-stationary
    double radius = 0.0;  // ||u - center|| / sqrt(n) after clipping
    double lambda_min = 0.0;
    int matvecs = 0;
    bool converged = true;
};

struct ConvexityReport {
    int k = 0;
    double epsilon = 0.0;
    int probed = 0;
    std::vector<ProbePoint> points;
    double global_min = 0.0;
    double margin_c = 0.0;  // = global_min: v^T Hess v > c/n on the probe set
    std::uint64_t seed = 0;
    std::string eig_method;
};

struct ProbeOptions {
    double epsilon = 0.05;
    int n_points = 50;  // including the center
    double clip = 1e-6;  // probe coordinates clipped to [-1+clip, 1-clip]
    EigOptions eig{};
    std::uint64_t seed = 0;
    const Eigen::VectorXd* toward = nullptr;  // optional stationary point
};

ConvexityReport convexity_probe(const TapContext& ctx, const AmpTrace& tr, int k, const ProbeOptions& opt);

struct NewtonOptions {
    double tol = 1e-10;        // on ||grad F||
    int max_steps = 60;
    double cg_rel_tol = 1e-12;
    int cg_max_iter = 2000;
    double jacobi_shift = 0.5;
};

struct NewtonResult {
    Eigen::VectorXd m;
    Eigen::VectorXd z;
    double grad_norm = 0.0;
    int steps = 0;
    int cg_iterations = 0;
    bool converged = false;
};

// Damped Newton in z (m = tanh z), steps from the m-space Newton system.
NewtonResult newton_tap(const TapContext& ctx, const Eigen::VectorXd& z_init, const NewtonOptions& opt);

struct StationaryReport {
    NewtonResult main;
    double dist_from_center = 0.0;  // ||m* - center|| / sqrt(n)
    double max_abs = 0.0;
    bool in_ball = false;           // dist <= epsilon
    int restarts = 0;
    int restarts_converged = 0;
    double restart_max_dist = 0.0;  // max ||m_r - m*|| / sqrt(n)
    double restart_pairwise_max = 0.0;
    bool unique = false;            // restart_pairwise_max <= 1e-6 (per sqrt n)
};

// Newton from `m_init`, then `restarts` perturbed starts drawn inside the ball
// of radius epsilon around `center`.
StationaryReport find_stationary_point(const TapContext& ctx, const Eigen::VectorXd& m_init,
                                       const Eigen::VectorXd& center, double epsilon, int restarts,
                                       std::uint64_t seed, const NewtonOptions& opt = {});

// Gradient at m^{k-1} rebuilt from the trace: -(z^k - z^{k-1})/n plus the
// Onsager-mismatch terms. Uses columns k-2, k-1 of M and k-1, k of Z.
Eigen::VectorXd gradient_from_trace(const TapContext& ctx, const AmpTrace& tr, int k);

}  // namespace tapscope
