#include "tapscope/sf_conditional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tapscope/errors.hpp"
#include "tapscope/rng.hpp"

namespace tapscope {

namespace {

double max_abs(const Eigen::MatrixXd& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

double opnorm(const Eigen::MatrixXd& A)
{
    if (A.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues()[0];
}

// X R_upper = B  =>  X = B R_upper^{-1}
Eigen::MatrixXd right_solve_upper(const Eigen::MatrixXd& B, const Eigen::MatrixXd& Ru)
{
    return Ru.transpose().triangularView<Eigen::Lower>().solve(B.transpose()).transpose();
}

}  // namespace

Eigen::VectorXd ConditioningData::apply_T(const Eigen::VectorXd& v) const
{
    if (!has_T) throw DomainError("ConditioningData: T is only defined for trace-built data");
    return T_left * (Q.transpose() * v);
}

Eigen::VectorXd ConditioningData::apply_TSF(const Eigen::VectorXd& v) const
{
    return TSF_left * (Q.transpose() * v);
}

Eigen::VectorXd ConditioningData::project_perp(const Eigen::VectorXd& v) const
{
    return v - Q * (Q.transpose() * v);
}

namespace {

void check_symmetric(const Eigen::MatrixXd& R, const Eigen::MatrixXd& S, double sym_tol)
{
    const Eigen::MatrixXd RtS = R.transpose() * S;
    const double scale = std::max(1.0, max_abs(RtS));
    if (max_abs(RtS - RtS.transpose()) > sym_tol * scale)
        throw DomainError("solve_B_SF: R^T S is not symmetric; no symmetric W with W R = S exists");
}

// B_SF through R = Q Ru:  (R^T R)^{-1} R^T S = Ru^{-1} Q^T S, so only Ru is
// inverted (condition number of R, not of R^T R).
Eigen::MatrixXd b_sf_from_qr(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& Ru, const Eigen::MatrixXd& S,
                             const Eigen::MatrixXd& B0)
{
    const auto U = Ru.triangularView<Eigen::Upper>();
    const Eigen::MatrixXd C = Ru.transpose() * Ru;
    Eigen::MatrixXd first = Q.transpose() * S - Ru * B0;
    U.solveInPlace(first);
    Eigen::MatrixXd third = B0.transpose() * C;
    U.transpose().solveInPlace(third);
    U.solveInPlace(third);
    return B0 + 0.5 * first - 0.5 * third;
}

}  // namespace

Eigen::MatrixXd solve_B_SF(const Eigen::MatrixXd& R, const Eigen::MatrixXd& S, const Eigen::MatrixXd& B0,
                           double sym_tol)
{
    const Eigen::Index n = R.rows(), k = R.cols();
    if (S.rows() != n || S.cols() != k || B0.rows() != k || B0.cols() != k)
        throw DomainError("solve_B_SF: dimension mismatch");
    check_symmetric(R, S, sym_tol);

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(R);
    const Eigen::MatrixXd Ru = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const double dmax = Ru.diagonal().cwiseAbs().maxCoeff();
    if (Ru.diagonal().cwiseAbs().minCoeff() > 1e-12 * dmax) {
        const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
        return b_sf_from_qr(Q, Ru, S, B0);
    }

    // rank-deficient R: pseudo-inverse of R^T R
    const Eigen::MatrixXd RtS = R.transpose() * S;
    const Eigen::MatrixXd RtR = R.transpose() * R;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(RtR);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double thr = 1e-10 * ev.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) inv[i] = std::abs(ev[i]) > thr ? 1.0 / ev[i] : 0.0;
    const Eigen::MatrixXd pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::MatrixXd E = RtS - RtR * B0 - B0.transpose() * RtR;
    return B0 + 0.5 * pinv * E;
}

ConditioningData build_conditioning(const Eigen::MatrixXd& W, const Eigen::MatrixXd& R,
                                    const Eigen::MatrixXd& S, const Eigen::MatrixXd& B0)
{
    const Eigen::Index n = R.rows(), k = R.cols();
    if (W.rows() != n || W.cols() != n) throw DomainError("build_conditioning: W must be n x n");
    if (S.rows() != n || S.cols() != k || B0.rows() != k || B0.cols() != k)
        throw DomainError("build_conditioning: dimension mismatch");
    ConditioningData c;
    c.n = static_cast<int>(n);
    c.k = static_cast<int>(k);
    c.R = R;
    c.S = S;
    c.B0 = B0;

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(R);
    c.Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
    c.R_upper = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c.R_upper);
    if (svd.singularValues()[k - 1] <= 1e-12 * svd.singularValues()[0])
        throw DomainError("build_conditioning: R is rank deficient");
    check_symmetric(R, S, 1e-8);

    c.B_SF = b_sf_from_qr(c.Q, c.R_upper, S, B0);
    // T_SF Q = S Ru^{-1} - Q Ru B_SF Ru^{-1}; with H = Q^T S Ru^{-1} (= Q^T W Q) and
    // N = Ru^{-T} B0^T Ru^T the second term is Q (H - N + N^T) / 2. Written this way
    // no product with Ru^{-1} on both sides is formed.
    const Eigen::MatrixXd SRi = right_solve_upper(S, c.R_upper);
    Eigen::MatrixXd H = c.Q.transpose() * SRi;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::MatrixXd N = B0.transpose() * c.R_upper.transpose();
    c.R_upper.triangularView<Eigen::Upper>().transpose().solveInPlace(N);
    c.TSF_left = SRi - 0.5 * c.Q * (H - N + N.transpose());
    c.G_SF = c.TSF_left * c.R_upper;

    const Eigen::MatrixXd WR = W * R;
    c.wr_residual = max_abs(WR - S) / std::max(1e-300, max_abs(W) * max_abs(R));
    const Eigen::MatrixXd RtS = R.transpose() * S;
    const double rs = std::max(1e-300, max_abs(RtS));
    c.rts_asymmetry = max_abs(RtS - RtS.transpose()) / rs;
    const Eigen::MatrixXd RtR = R.transpose() * R;
    c.bdef_residual = max_abs(RtS - RtR * c.B_SF - c.B_SF.transpose() * RtR) / rs;
    const Eigen::MatrixXd G_direct = S - R * c.B_SF;
    c.tsf_r_residual = max_abs(G_direct - c.G_SF) / std::max(1e-300, max_abs(G_direct));
    c.bsf_minus_b0_op = opnorm(c.B_SF - c.B0);
    return c;
}

ConditioningData build_conditioning(const AmpTrace& tr, const ModelInstance& inst)
{
    const int k = tr.k;
    if (k < 2) throw DomainError("build_conditioning: need k >= 2");
    const double lam = tr.lambda;
    const int n = tr.n();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(tr.M);
    const double smin = svd.singularValues()[k - 1];
    if (!(smin > 1e-8 * std::sqrt(double(n))))
        throw DomainError("build_conditioning: M is numerically rank deficient");

    Eigen::MatrixXd B0 = Eigen::MatrixXd::Zero(k, k);
    for (int s = 1; s < k; ++s) B0(s - 1, s) = tr.onsager[s];
    Eigen::MatrixXd R = lam * tr.M;
    Eigen::MatrixXd S = tr.G + lam * tr.M * B0;

    ConditioningData c = build_conditioning(inst.W, R, S, B0);
    c.lambda = lam;
    c.min_singular_M = smin;
    // T = lambda^{-1} G (M^T M)^{-1} M^T = G (R^T R)^{-1} R^T = G R_upper^{-1} Q^T
    c.T_left = right_solve_upper(tr.G, c.R_upper);
    c.has_T = true;
    c.t_minus_tsf_op = opnorm(c.T_left - c.TSF_left);
    return c;
}

IdentityReport verify_conditional_identity(const Eigen::MatrixXd& W, const ConditioningData& c, int probes,
                                           std::uint64_t seed)
{
    IdentityReport rep;
    const Eigen::MatrixXd WQ = W * c.Q;
    const Eigen::MatrixXd QtWQ = c.Q.transpose() * WQ;
    // W - P W P (P = perp projector) = WQQ^T + QQ^T W - Q (Q^T W Q) Q^T
    const Eigen::MatrixXd L = WQ - c.TSF_left - 0.5 * c.Q * QtWQ;
    Eigen::MatrixXd D = L * c.Q.transpose();
    D.noalias() += c.Q * L.transpose();
    rep.frobenius = D.norm();
    rep.relative = rep.frobenius / W.norm();

    auto gen = substream(seed, "annihilation");
    for (int p = 0; p < probes; ++p) {
        Eigen::VectorXd r = normal_vector(gen, c.n);
        Eigen::VectorXd a = c.apply_TSF(c.project_perp(r));
        rep.annihilation = std::max(rep.annihilation, a.norm() / r.norm());
    }
    return rep;
}

Eigen::VectorXd g_amp(const ConditioningData& c, const Eigen::VectorXd& v, const Eigen::VectorXd& xi)
{
    return std::sqrt(double(c.n)) * c.apply_T(v) + c.project_perp(v).norm() * xi;
}

Eigen::VectorXd g_sf(const ConditioningData& c, const Eigen::VectorXd& v, const Eigen::VectorXd& xi)
{
    return std::sqrt(double(c.n)) * c.apply_TSF(v) + c.project_perp(v).norm() * c.project_perp(xi);
}

double lowrank_opnorm(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qa(A), qb(B);
    const Eigen::Index ka = A.cols(), kb = B.cols();
    Eigen::MatrixXd Ra = qa.matrixQR().topRows(ka).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rb = qb.matrixQR().topRows(kb).triangularView<Eigen::Upper>();
    return opnorm(Ra * Rb.transpose());
}

double sf_objective(const TapContext& ctx, const ConditioningData& c, const Eigen::VectorXd& xi,
                    const Eigen::VectorXd& u, const Eigen::VectorXd& v)
{
    const double lam = ctx.lambda();
    const double sqn = std::sqrt(double(ctx.n()));
    return 2.0 * lam * v.dot(c.apply_T(v)) + (2.0 * lam / sqn) * c.project_perp(v).norm() * xi.dot(v) +
           f_x(ctx, v, u);
}

namespace {

// A_s = diag(dvec) + U C U^T, the dual majorant of Phi at t = s sqrt(n).
struct DualOperator {
    Eigen::VectorXd dvec;
    Eigen::MatrixXd U;
    Eigen::MatrixXd C;

    void apply(const Eigen::MatrixXd& X, Eigen::MatrixXd& AX) const
    {
        AX.noalias() = dvec.asDiagonal() * X;
        Eigen::MatrixXd tmp = C * (U.transpose() * X);
        AX.noalias() += U * tmp;
    }
};

DualOperator make_dual(const TapContext& ctx, const ConditioningData& c, const Eigen::VectorXd& xi,
                       const Eigen::VectorXd& u, double s)
{
    const int n = ctx.n(), k = c.k;
    const double lam = ctx.lambda();
    const double l2 = lam * lam;
    const double ridge = ctx.variant == Variant::AMS ? l2 * (1.0 - ctx.q_inf) : l2 * (1.0 - u.squaredNorm() / n);
    DualOperator op;
    op.dvec = -(1.0 - u.array().square()).inverse().matrix();
    op.dvec.array() += lam * s - ridge;

    const int r = 2 * k + 3;
    op.U.resize(n, r);
    op.U << c.Q, c.T_left, ctx.inst->x, u, xi;
    op.C = Eigen::MatrixXd::Zero(r, r);
    op.C.topLeftCorner(k, k) = -lam * s * Eigen::MatrixXd::Identity(k, k);
    op.C.block(0, k, k, k) = lam * Eigen::MatrixXd::Identity(k, k);
    op.C.block(k, 0, k, k) = lam * Eigen::MatrixXd::Identity(k, k);
    op.C(2 * k, 2 * k) = l2 / n;
    op.C(2 * k + 1, 2 * k + 1) = ctx.variant == Variant::FMM ? 2.0 * l2 / n : 0.0;
    op.C(2 * k + 2, 2 * k + 2) = lam / (s * n);
    return op;
}

struct TopEig {
    double value;
    Eigen::VectorXd vec;
};

TopEig dual_top(const DualOperator& op, const Eigen::VectorXd* warm)
{
    BlockOp neg = [&op](const Eigen::MatrixXd& X, Eigen::MatrixXd& AX) {
        op.apply(X, AX);
        AX = -AX;
    };
    Eigen::VectorXd pre = ((-op.dvec).cwiseMax(0.0).array() + 1.0).inverse().matrix();
    LobpcgOptions lo;
    lo.block = 3;
    lo.tol = 1e-10;
    lo.max_iter = 2000;
    EigResult er = lobpcg_smallest(neg, op.dvec.size(), pre, warm, lo);
    return {-er.value, er.vector};
}

Eigen::VectorXd clip_box(Eigen::VectorXd u, double clip)
{
    const double lim = 1.0 - clip;
    return u.cwiseMax(-lim).cwiseMin(lim);
}

}  // namespace

ComparisonReport compare_objectives(const TapContext& ctx, const AmpTrace& tr, const ConditioningData& c,
                                    const Eigen::VectorXd& xi, const ComparisonOptions& opt)
{
    if (!c.has_T) throw DomainError("compare_objectives: conditioning data must come from a trace");
    const int n = ctx.n();
    const double sqn = std::sqrt(double(n));
    ComparisonReport rep;
    rep.t_minus_tsf_op = c.t_minus_tsf_op;
    rep.bsf_minus_b0_op = c.bsf_minus_b0_op;

    const Eigen::VectorXd center = tr.M.col(tr.k - 1);
    std::vector<std::pair<std::string, Eigen::VectorXd>> pts{{"center", center}};
    auto gen = substream(opt.seed, "compare-probe");
    std::uniform_real_distribution<double> Ud(0.0, 1.0);
    for (int j = 0; static_cast<int>(pts.size()) < opt.n_points; ++j) {
        Eigen::VectorXd d = normal_vector(gen, n);
        const bool sphere = j % 2 == 0;
        const double r = sphere ? opt.epsilon : opt.epsilon * Ud(gen);
        d *= r * sqn / d.norm();
        pts.emplace_back(sphere ? "sphere" : "interior", center + d);
    }

    std::vector<Eigen::VectorXd> us;
    for (auto& pt : pts) us.push_back(clip_box(pt.second, opt.clip));
    std::vector<EigResult> goe{min_eig_scaled_hessian(ctx, us[0], opt.eig)};
    if (us.size() > 1) {
        std::vector<Eigen::VectorXd> rest(us.begin() + 1, us.end());
        std::vector<EigResult> more = min_eig_scaled_hessian_batch(ctx, rest, opt.eig, &goe[0].vector);
        goe.insert(goe.end(), more.begin(), more.end());
    }

    std::vector<Eigen::VectorXd> dirs;
    Eigen::VectorXd warm_sf;
    rep.goe_sup = rep.sf_upper_sup = rep.sf_lower_sup = -std::numeric_limits<double>::infinity();
    for (std::size_t pi = 0; pi < pts.size(); ++pi) {
        const Eigen::VectorXd& u = us[pi];
        SidePoint sp;
        sp.kind = pts[pi].first;
        sp.radius = (u - center).norm() / sqn;
        sp.goe = -goe[pi].value;
        dirs.push_back(goe[pi].vector);

        // golden section in log s; lambda_max(A_t) is convex in t
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = std::log(opt.s_lo), b = std::log(opt.s_hi);
        auto eval = [&](double ls) {
            double s = std::exp(ls);
            DualOperator op = make_dual(ctx, c, xi, u, s);
            TopEig te = dual_top(op, warm_sf.size() ? &warm_sf : nullptr);
            warm_sf = te.vec;
            sp.search.emplace_back(s, te.value);
            return te;
        };
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        TopEig f1 = eval(x1), f2 = eval(x2);
        for (int it = 0; it < opt.golden_iters; ++it) {
            if (f1.value <= f2.value) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = eval(x2);
            }
        }
        const bool first = f1.value <= f2.value;
        TopEig best = first ? f1 : f2;
        sp.s_star = std::exp(first ? x1 : x2);
        sp.sf_upper = best.value;
        Eigen::VectorXd v = best.vec / best.vec.norm();
        if (xi.dot(v) < 0.0) v = -v;
        sp.sf_lower = sf_objective(ctx, c, xi, u, v);
        dirs.push_back(v);

        rep.goe_sup = std::max(rep.goe_sup, sp.goe);
        rep.sf_upper_sup = std::max(rep.sf_upper_sup, sp.sf_upper);
        rep.sf_lower_sup = std::max(rep.sf_lower_sup, sp.sf_lower);
        rep.points.push_back(std::move(sp));
    }

    auto gd = substream(opt.seed, "coupling-dirs");
    for (int j = 0; j < opt.directions; ++j) {
        Eigen::VectorXd v = normal_vector(gd, n);
        dirs.push_back(v / v.norm());
    }
    for (const auto& v : dirs)
        rep.coupling_gap = std::max(rep.coupling_gap, (g_amp(c, v, xi) - g_sf(c, v, xi)).norm() / sqn);
    return rep;
}

}  // namespace tapscope
