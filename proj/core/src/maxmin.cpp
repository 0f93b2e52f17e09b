#include "tapscope/maxmin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tapscope/errors.hpp"
#include "tapscope/quadrature.hpp"

namespace tapscope {

ScalarParams make_scalar_params(double lambda, double gamma0, Variant v, int order)
{
    const double c = chi(v);
    if (v == Variant::AMS && !(gamma0 > 0.0))
        throw RegimeError("scalar certificate: AMS needs gamma0 > 0 (M_inf undefined otherwise)");
    FixedPointConstants fp = solve_fixed_point(lambda, gamma0, c, order);
    if (std::abs(fp.q_identity_residual) > 1e-8 || std::abs(fp.b_identity_residual) > 1e-8)
        throw InvariantError("scalar certificate: fixed-point identities off by more than 1e-8");
    ScalarParams p;
    p.lambda = lambda;
    p.gamma0 = gamma0;
    p.chi = c;
    p.gamma_inf = fp.gamma_inf;
    p.q_inf = fp.q_inf;
    p.b_inf = fp.b_inf;
    p.quadrature_order = order;
    p.order_g = order_for_variance(lambda * lambda * fp.q_inf, order);
    p.order_g0 = c > 0.0 ? order_for_variance(gamma0, order) : 1;
    return p;
}

namespace {

// Calls f(G_inf, M_inf, weight) over the quadrature nodes.
template <class F>
void for_nodes(const ScalarParams& p, F&& f)
{
    const HermiteRule& a = hermite_rule(p.order_g);
    const double sg = p.lambda * std::sqrt(p.q_inf);
    if (p.chi == 0.0) {
        for (int i = 0; i < a.order(); ++i) {
            const double g = sg * a.x[i];
            f(g, std::tanh(p.gamma_inf + g), a.w[i]);
        }
        return;
    }
    const HermiteRule& b = hermite_rule(p.order_g0);
    const double s0 = std::sqrt(p.gamma0);
    for (int i = 0; i < a.order(); ++i) {
        const double g = sg * a.x[i];
        for (int j = 0; j < b.order(); ++j)
            f(g, std::tanh(p.gamma_inf + g + s0 * b.x[j]), a.w[i] * b.w[j]);
    }
}

// (1/(1-m^2) - a)^{-1} = (1-m^2) / (1 - a (1-m^2))
double Dfac(double m, double alpha_v)
{
    const double s = 1.0 - m * m;
    return s / (1.0 - alpha_v * s);
}

void check_alpha_v(double alpha_v)
{
    if (!(alpha_v < 1.0)) throw DomainError("alpha_v must be < 1");
}

}  // namespace

double theta_objective(double v, double g, double m, double xi, double u_point, const MaxMinQuery& q,
                       const ScalarParams& p)
{
    const double sq = std::sqrt(p.q_inf);
    const double lin = 2.0 * p.lambda * (q.rho / (p.lambda * sq) * g + std::sqrt(1.0 - q.rho * q.rho) * xi) +
                       q.alpha_rho * m / sq + q.alpha_u;
    return lin * v - v * v / (1.0 - u_point * u_point) + q.alpha_v * v * v;
}

double theta_closed_form(double g, double m, double xi, double u_point, const MaxMinQuery& q,
                         const ScalarParams& p)
{
    check_alpha_v(q.alpha_v);
    if (!(std::abs(u_point) < 1.0)) throw DomainError("theta: |u| must be < 1");
    const double den = 1.0 / (1.0 - u_point * u_point) - q.alpha_v;
    if (!(den > 0.0)) throw DomainError("theta: objective not concave");
    const double sq = std::sqrt(p.q_inf);
    const double lin = 2.0 * p.lambda * (q.rho / (p.lambda * sq) * g + std::sqrt(1.0 - q.rho * q.rho) * xi) +
                       q.alpha_rho * m / sq + q.alpha_u;
    return lin * lin / (4.0 * den);
}

double L_value(const MaxMinQuery& q, const ScalarParams& p)
{
    check_alpha_v(q.alpha_v);
    const double l2 = p.lambda * p.lambda;
    const double sq = std::sqrt(p.q_inf);
    double e = 0.0;
    for_nodes(p, [&](double g, double m, double w) {
        const double t = 2.0 * q.rho / sq * g + q.alpha_rho * m / sq + q.alpha_u;
        e += w * (4.0 * l2 * (1.0 - q.rho * q.rho) + t * t) * Dfac(m, q.alpha_v) / 4.0;
    });
    return l2 * q.u * q.u - l2 * (1.0 - p.q_inf) + (1.0 - p.chi) * 2.0 * l2 * p.q_inf * q.rho * q.rho -
           q.alpha_rho * q.rho - q.alpha_u * q.u - q.alpha_v + e;
}

Eigen::Matrix4d AMatrices::full() const
{
    Eigen::Matrix4d A;
    A << A11, A12, A12.transpose(), A22;
    return A;
}

double AMatrices::evaluate(const MaxMinQuery& q) const
{
    Eigen::Vector4d w(q.rho, q.u, q.alpha_rho, q.alpha_u);
    return w.dot(full() * w) + constant;
}

AMatrices A_matrices(double alpha_v, const ScalarParams& p)
{
    check_alpha_v(alpha_v);
    double eD = 0, eG2D = 0, eGMD = 0, eGD = 0, eM2D = 0, eMD = 0;
    for_nodes(p, [&](double g, double m, double w) {
        const double d = w * Dfac(m, alpha_v);
        eD += d;
        eG2D += g * g * d;
        eGMD += g * m * d;
        eGD += g * d;
        eM2D += m * m * d;
        eMD += m * d;
    });
    const double l2 = p.lambda * p.lambda;
    const double q = p.q_inf, sq = std::sqrt(q);
    AMatrices A;
    A.alpha_v = alpha_v;
    A.A11 << (1.0 - p.chi) * 2.0 * l2 * q + eG2D / q - l2 * eD, 0.0, 0.0, l2;
    A.A12 << -0.5 + eGMD / (2.0 * q), eGD / (2.0 * sq), 0.0, -0.5;
    A.A22 << eM2D / q, eMD / sq, eMD / sq, eD;
    A.A22 *= 0.25;
    A.constant = -l2 * (1.0 - q) - alpha_v + l2 * eD;
    return A;
}

AMatrices A_matrices_closed_form(const ScalarParams& p)
{
    const double l2 = p.lambda * p.lambda;
    const double q = p.q_inf, b = p.b_inf, sq = std::sqrt(q);
    const double r = 1.0 - 4.0 * q + 3.0 * b;
    AMatrices A;
    A.A11 << (1.0 - p.chi) * 2.0 * l2 * q - 2.0 * l2 * l2 * q * r, 0.0, 0.0, l2;
    A.A12 << 0.5 * (-1.0 + l2 * r), -l2 * sq * (q - b), 0.0, -0.5;
    A.A22 << 1.0 - b / q, sq * (1.0 - b / q), sq * (1.0 - b / q), 1.0 - q;
    A.A22 *= 0.25;
    A.constant = -l2 * (1.0 - q) + l2 * (1.0 - q);  // E[1 - M^2] = 1 - q
    return A;
}

std::array<double, 4> ibp_identities(const ScalarParams& p)
{
    double gm = 0, gm2 = 0, gm3 = 0, g2 = 0;
    for_nodes(p, [&](double g, double m, double w) {
        gm += w * g * m;
        gm2 += w * g * m * m;
        gm3 += w * g * m * m * m;
        g2 += w * g * g * (1.0 - m * m);
    });
    const double l2 = p.lambda * p.lambda;
    const double q = p.q_inf, b = p.b_inf;
    return {std::abs(gm - l2 * q * (1.0 - q)), std::abs(gm2 - 2.0 * l2 * q * (q - b)),
            std::abs(gm3 - 3.0 * l2 * q * (q - b)),
            std::abs(g2 - (l2 * q - l2 * q * q - 2.0 * l2 * l2 * q * q * (1.0 - 4.0 * q + 3.0 * b)))};
}

SchurCertificate schur_certificate(const ScalarParams& p)
{
    const double l2 = p.lambda * p.lambda;
    const double q = p.q_inf, b = p.b_inf;
    const double a = 1.0 - 2.0 * q + b;
    SchurCertificate s;
    s.c2 = 1.0 / a - l2;
    s.c1 = (-(1.0 - q) + 2.0 * l2 * a * a - l2 * l2 * a * a * (1.0 - 3.0 * q + 2.0 * b)) / ((1.0 - b / q) * a) -
           2.0 * p.chi * l2 * q;
    s.schur = s.c1 + q * s.c2;
    const double d = 1.0 - l2 * a;
    s.schur_expanded = -q * l2 * d - d * d / (1.0 - b / q) - 2.0 * p.chi * l2 * q;

    Eigen::Matrix2d target;
    target << s.c1, std::sqrt(q) * s.c2, std::sqrt(q) * s.c2, -s.c2;
    auto schur_block = [](const AMatrices& A) -> Eigen::Matrix2d {
        return A.A11 - A.A12 * A.A22.ldlt().solve(A.A12.transpose());
    };
    const AMatrices cf = A_matrices_closed_form(p);
    const AMatrices qd = A_matrices(0.0, p);
    s.block_residual = (schur_block(cf) - target).cwiseAbs().maxCoeff();
    s.quadrature_residual = (schur_block(qd) - target).cwiseAbs().maxCoeff();
    s.chain_ok = q > b && a < 1.0 - q && 1.0 - q < 1.0 / l2;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(qd.A22);
    s.a22_positive = es.eigenvalues()[0] > 0.0;
    s.verdict = s.c2 > 0.0 && s.schur < 0.0;
    return s;
}

std::vector<double> default_alpha_grid()
{
    std::vector<double> g;
    for (int i = 0; i <= 30; ++i) g.push_back(0.01 * i);
    return g;
}

double inner_min(const AMatrices& A, double rho, double u, double box, Eigen::Vector2d* argmin)
{
    const Eigen::Matrix2d& H = A.A22;
    const Eigen::Vector2d b = A.A12.transpose() * Eigen::Vector2d(rho, u);
    auto val = [&](const Eigen::Vector2d& a) { return a.dot(H * a) + 2.0 * b.dot(a); };

    Eigen::Vector2d best = -H.ldlt().solve(b);
    if (best.cwiseAbs().maxCoeff() <= box) {
        if (argmin) *argmin = best;
        return val(best);
    }
    // convex: the box minimizer lies on an edge
    double bv = std::numeric_limits<double>::infinity();
    for (int fixed = 0; fixed < 2; ++fixed) {
        const int other = 1 - fixed;
        for (double s : {-box, box}) {
            Eigen::Vector2d a;
            a[fixed] = s;
            // d/da_o: 2 H_oo a_o + 2 H_of s + 2 b_o = 0
            a[other] = std::clamp(-(H(other, fixed) * s + b[other]) / H(other, other), -box, box);
            const double v = val(a);
            if (v < bv) {
                bv = v;
                best = a;
            }
        }
    }
    if (argmin) *argmin = best;
    return bv;
}

double envelope(const AMatrices& A, double rho, double u, double box, Eigen::Vector2d* argmin)
{
    const Eigen::Vector2d z(rho, u);
    return z.dot(A.A11 * z) + A.constant + inner_min(A, rho, u, box, argmin);
}

double unconstrained_dual_radius(const AMatrices& A)
{
    const Eigen::Matrix2d S = A.A22.ldlt().solve(A.A12.transpose());
    return S.cwiseAbs().rowwise().sum().maxCoeff();
}

MarginRow margin_row(const AMatrices& A, const MarginOptions& opt_in)
{
    MarginOptions opt = opt_in;
    if (opt.adaptive_box) opt.box = std::max(opt.box, 1.5 * unconstrained_dual_radius(A));
    MarginRow row;
    row.box = opt.box;
    row.alpha_v = A.alpha_v;
    row.L0 = A.constant;
    const int N = std::max(opt.grid, 3);
    double best = -std::numeric_limits<double>::infinity();
    double br = 0, bu = 0;
    for (int i = 0; i < N; ++i) {
        const double r = -1.0 + 2.0 * i / (N - 1);
        for (int j = 0; j < N; ++j) {
            const double u = -1.0 + 2.0 * j / (N - 1);
            const double v = envelope(A, r, u, opt.box);
            if (v > best) {
                best = v;
                br = r;
                bu = u;
            }
        }
    }
    // compass polish inside [-1,1]^2
    double step = 2.0 / (N - 1);
    while (step > opt.polish_tol) {
        bool moved = false;
        for (auto [dr, du] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
            const double r = std::clamp(br + dr * step, -1.0, 1.0);
            const double u = std::clamp(bu + du * step, -1.0, 1.0);
            const double v = envelope(A, r, u, opt.box);
            if (v > best) {
                best = v;
                br = r;
                bu = u;
                moved = true;
            }
        }
        if (!moved) step *= 0.5;
    }
    Eigen::Vector2d am;
    row.sup = envelope(A, br, bu, opt.box, &am);
    row.rho_star = br;
    row.u_star = bu;
    row.alpha_rho_star = am[0];
    row.alpha_u_star = am[1];
    row.inner_interior = am.cwiseAbs().maxCoeff() < opt.box;
    row.at_origin = std::hypot(br, bu) <= opt.origin_tol && am.norm() <= opt.origin_tol;
    row.margin = -row.sup;
    return row;
}

MarginResult margin_search(const ScalarParams& p, const std::vector<double>& alpha_grid, const MarginOptions& opt)
{
    MarginResult res;
    res.margin_c = -std::numeric_limits<double>::infinity();
    for (double av : alpha_grid) {
        MarginRow row = margin_row(A_matrices(av, p), opt);
        if (row.margin > res.margin_c) {
            res.margin_c = row.margin;
            res.alpha_v_star = av;
            res.success = row.margin > 0.0 && row.at_origin;
        }
        res.rows.push_back(row);
    }
    return res;
}

}  // namespace tapscope
