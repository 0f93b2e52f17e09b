#include "tapscope/tap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tapscope/errors.hpp"
#include "tapscope/rng.hpp"

namespace tapscope {

TapContext::TapContext(const ModelInstance& i, double q, double delta)
    : inst(&i), variant(i.params.variant), q_inf(q), clamp_delta(delta)
{
    if (variant == Variant::AMS && !(q > 0.0 && q < 1.0))
        throw DomainError("TapContext: q_inf must lie in (0,1) for AMS");
}

double binary_entropy(double m)
{
    // log 2 - ((1+m) log(1+m) + (1-m) log(1-m)) / 2, with 0 log 0 = 0
    double a = (m > -1.0) ? (1.0 + m) * std::log1p(m) : 0.0;
    double b = (m < 1.0) ? (1.0 - m) * std::log1p(-m) : 0.0;
    return std::log(2.0) - 0.5 * (a + b);
}

namespace {

void check_domain(const TapContext& ctx, const Eigen::VectorXd& m)
{
    if (m.size() != ctx.n()) throw DomainError("TAP: vector length does not match n");
    const double lim = 1.0 - ctx.clamp_delta;
    for (Eigen::Index i = 0; i < m.size(); ++i)
        if (!(std::abs(m[i]) <= lim))
            throw DomainError("TAP: |m_i| exceeds 1 - clamp_delta at i=" + std::to_string(i));
}

// coefficient of ||v||^2 in n * Hess F coming from the Onsager term
double ridge(const TapContext& ctx, const Eigen::VectorXd& u)
{
    const double l2 = ctx.lambda() * ctx.lambda();
    if (ctx.variant == Variant::AMS) return l2 * (1.0 - ctx.q_inf);
    return l2 * (1.0 - u.squaredNorm() / ctx.n());
}

Eigen::VectorXd grad_core(const TapContext& ctx, const Eigen::VectorXd& m, const Eigen::VectorXd& atanh_m)
{
    const double n = ctx.n();
    const double lam = ctx.lambda();
    const double l2 = lam * lam;
    Eigen::VectorXd g = -lam * (ctx.inst->Y * m) + atanh_m;
    if (ctx.variant == Variant::FMM) {
        g += l2 * (1.0 - m.squaredNorm() / n) * m;
    } else {
        g -= ctx.inst->y;
        g += l2 * (1.0 - ctx.q_inf) * m;
    }
    return g / n;
}

}  // namespace

double free_energy(const TapContext& ctx, const Eigen::VectorXd& m)
{
    check_domain(ctx, m);
    const double n = ctx.n();
    const double lam = ctx.lambda();
    const double l2 = lam * lam;
    const double quad = m.dot(ctx.inst->Y * m);
    const double Q = m.squaredNorm() / n;
    double hs = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) hs += binary_entropy(m[i]);
    double L = hs / n;
    if (ctx.variant == Variant::FMM) {
        L += 0.25 * l2 * (1.0 - Q) * (1.0 - Q);
    } else {
        const double q = ctx.q_inf;
        L += ctx.inst->y.dot(m) / n + 0.25 * l2 * (1.0 - q) * (1.0 + q - 2.0 * Q);
    }
    return -lam / (2.0 * n) * quad - L;
}

Eigen::VectorXd gradient(const TapContext& ctx, const Eigen::VectorXd& m)
{
    check_domain(ctx, m);
    Eigen::VectorXd at = m.unaryExpr([](double v) { return std::atanh(v); });
    return grad_core(ctx, m, at);
}

Eigen::VectorXd gradient_from_z(const TapContext& ctx, const Eigen::VectorXd& z)
{
    Eigen::VectorXd m = z.array().tanh();
    check_domain(ctx, m);
    return grad_core(ctx, m, z);
}

double f_x(const TapContext& ctx, const Eigen::VectorXd& v, const Eigen::VectorXd& u)
{
    const double n = ctx.n();
    const double l2 = ctx.lambda() * ctx.lambda();
    const double xv = ctx.inst->x.dot(v);
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i] * v[i] / (1.0 - u[i] * u[i]);
    double f = l2 * xv * xv / n - s - ridge(ctx, u) * v.squaredNorm();
    if (ctx.variant == Variant::FMM) {
        const double uv = u.dot(v);
        f += 2.0 * l2 * uv * uv / n;
    }
    return f;
}

double hessian_quadratic_form(const TapContext& ctx, const Eigen::VectorXd& u, const Eigen::VectorXd& v)
{
    check_domain(ctx, u);
    const double n = ctx.n();
    const double lam = ctx.lambda();
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i] * v[i] / (1.0 - u[i] * u[i]);
    double val = -lam * v.dot(ctx.inst->Y * v) + s + ridge(ctx, u) * v.squaredNorm();
    if (ctx.variant == Variant::FMM) {
        const double uv = u.dot(v);
        val -= 2.0 * lam * lam * uv * uv / n;
    }
    return val / n;
}

double hessian_quadratic_form_split(const TapContext& ctx, const Eigen::VectorXd& u, const Eigen::VectorXd& v)
{
    check_domain(ctx, u);
    const double lam = ctx.lambda();
    return -(lam * v.dot(ctx.inst->W * v) + f_x(ctx, v, u)) / ctx.n();
}

Eigen::MatrixXd hessian_matrix(const TapContext& ctx, const Eigen::VectorXd& u)
{
    check_domain(ctx, u);
    const double n = ctx.n();
    const double lam = ctx.lambda();
    Eigen::MatrixXd H = -lam * ctx.inst->Y;
    const double r = ridge(ctx, u);
    for (Eigen::Index i = 0; i < u.size(); ++i) H(i, i) += 1.0 / (1.0 - u[i] * u[i]) + r;
    if (ctx.variant == Variant::FMM) H.noalias() -= (2.0 * lam * lam / n) * u * u.transpose();
    return H / n;
}

Eigen::MatrixXd hessian_matrix_split(const TapContext& ctx, const Eigen::VectorXd& u)
{
    check_domain(ctx, u);
    const double n = ctx.n();
    const double lam = ctx.lambda();
    const double l2 = lam * lam;
    const Eigen::VectorXd& x = ctx.inst->x;
    // -(lambda W + lambda^2 x x^T / n - D - ridge I [+ 2 lambda^2 u u^T / n])
    Eigen::MatrixXd F = (l2 / n) * x * x.transpose();
    const double r = ridge(ctx, u);
    for (Eigen::Index i = 0; i < u.size(); ++i) F(i, i) -= 1.0 / (1.0 - u[i] * u[i]) + r;
    if (ctx.variant == Variant::FMM) F.noalias() += (2.0 * l2 / n) * u * u.transpose();
    return -(lam * ctx.inst->W + F) / n;
}

ScaledHessian::ScaledHessian(const TapContext& ctx, const Eigen::VectorXd& u) : ctx_(&ctx), u_(u)
{
    check_domain(ctx, u);
    const double r = ridge(ctx, u);
    diag_ = (1.0 - u.array().square()).inverse().matrix();
    diag_.array() += r;
    if (ctx.variant == Variant::FMM) rank1_ = -2.0 * ctx.lambda() * ctx.lambda() / ctx.n();
}

void ScaledHessian::apply(const Eigen::MatrixXd& X, Eigen::MatrixXd& AX) const
{
    Eigen::MatrixXd YX;
    multiply(ctx_->inst->Y, X, YX);
    finish(X, YX, AX);
}

void ScaledHessian::finish(const Eigen::MatrixXd& X, const Eigen::MatrixXd& YX, Eigen::MatrixXd& AX) const
{
    AX = -ctx_->lambda() * YX;
    AX.noalias() += diag_.asDiagonal() * X;
    if (rank1_ != 0.0) AX.noalias() += (rank1_ * u_) * (u_.transpose() * X);
}

BlockOp ScaledHessian::op() const
{
    return [this](const Eigen::MatrixXd& X, Eigen::MatrixXd& AX) { apply(X, AX); };
}

Eigen::VectorXd ScaledHessian::jacobi(double shift) const
{
    return (diag_.array() + shift).inverse().matrix();
}

std::string to_string(EigMethod m)
{
    switch (m) {
    case EigMethod::Dense: return "dense";
    case EigMethod::Lobpcg: return "lobpcg";
    default: return "auto";
    }
}

EigMethod parse_eig_method(const std::string& s)
{
    if (s == "dense") return EigMethod::Dense;
    if (s == "lobpcg") return EigMethod::Lobpcg;
    if (s == "auto") return EigMethod::Auto;
    throw DomainError("unknown eigensolver '" + s + "' (expected auto, dense, lobpcg)");
}

EigResult min_eig_scaled_hessian(const TapContext& ctx, const Eigen::VectorXd& u, const EigOptions& opt,
                                 const Eigen::VectorXd* warm)
{
    const bool dense = opt.method == EigMethod::Dense ||
                       (opt.method == EigMethod::Auto && ctx.n() <= opt.dense_max_n);
    if (dense) return dense_smallest(ctx.n() * hessian_matrix(ctx, u));
    ScaledHessian H(ctx, u);
    return lobpcg_smallest(H.op(), ctx.n(), H.jacobi(opt.jacobi_shift), warm, opt.lobpcg);
}

std::vector<EigResult> min_eig_scaled_hessian_batch(const TapContext& ctx, const std::vector<Eigen::VectorXd>& us,
                                                    const EigOptions& opt, const Eigen::VectorXd* warm)
{
    const int m = static_cast<int>(us.size());
    const bool dense = opt.method == EigMethod::Dense ||
                       (opt.method == EigMethod::Auto && ctx.n() <= opt.dense_max_n);
    std::vector<EigResult> out;
    if (dense) {
        for (const auto& u : us) out.push_back(dense_smallest(ctx.n() * hessian_matrix(ctx, u)));
        return out;
    }
    std::vector<ScaledHessian> hs;
    std::vector<Eigen::VectorXd> pre;
    hs.reserve(m);
    for (const auto& u : us) {
        hs.emplace_back(ctx, u);
        pre.push_back(hs.back().jacobi(opt.jacobi_shift));
    }
    Eigen::MatrixXd big, Ybig;
    BatchOp op = [&](const std::vector<int>& active, const std::vector<const Eigen::MatrixXd*>& Xs,
                     std::vector<Eigen::MatrixXd>& AXs) {
        Eigen::Index cols = 0;
        for (int j : active) cols += Xs[j]->cols();
        big.resize(ctx.n(), cols);
        Eigen::Index c = 0;
        for (int j : active) {
            big.middleCols(c, Xs[j]->cols()) = *Xs[j];
            c += Xs[j]->cols();
        }
        multiply(ctx.inst->Y, big, Ybig);
        c = 0;
        for (int j : active) {
            const Eigen::Index w = Xs[j]->cols();
            hs[j].finish(*Xs[j], Ybig.middleCols(c, w), AXs[j]);
            c += w;
        }
    };
    return lobpcg_smallest_batch(op, ctx.n(), m, pre, std::vector<const Eigen::VectorXd*>(m, warm), opt.lobpcg);
}

namespace {

Eigen::VectorXd clip_box(Eigen::VectorXd u, double clip)
{
    const double lim = 1.0 - clip;
    return u.cwiseMax(-lim).cwiseMin(lim);
}

Eigen::VectorXd random_offset(std::mt19937_64& gen, Eigen::Index n, double radius_per_sqrt_n)
{
    Eigen::VectorXd d = normal_vector(gen, n);
    d *= radius_per_sqrt_n * std::sqrt(double(n)) / d.norm();
    return d;
}

}  // namespace

ConvexityReport convexity_probe(const TapContext& ctx, const AmpTrace& tr, int k, const ProbeOptions& opt)
{
    if (k < 1 || k > tr.k) throw DomainError("convexity_probe: trace has fewer than k iterates");
    if (!(opt.epsilon >= 0.0)) throw DomainError("convexity_probe: epsilon must be >= 0");
    const Eigen::Index n = ctx.n();
    const double sqn = std::sqrt(double(n));
    const Eigen::VectorXd center = tr.M.col(k - 1);

    ConvexityReport rep;
    rep.k = k;
    rep.epsilon = opt.epsilon;
    rep.seed = opt.seed;
    const bool dense = opt.eig.method == EigMethod::Dense ||
                       (opt.eig.method == EigMethod::Auto && n <= opt.eig.dense_max_n);
    rep.eig_method = dense ? "dense" : "lobpcg";

    std::vector<std::pair<std::string, Eigen::VectorXd>> pts;
    pts.emplace_back("center", center);
    if (opt.epsilon > 0.0) {
        if (opt.toward) {
            for (double t : {0.5, 1.0})
                pts.emplace_back("toward-stationary", center + t * (*opt.toward - center));
        }
        auto gen = substream(opt.seed, "probe");
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int j = 0; static_cast<int>(pts.size()) < opt.n_points; ++j) {
            const bool sphere = (j % 2 == 0);
            const double r = sphere ? opt.epsilon : opt.epsilon * U(gen);
            pts.emplace_back(sphere ? "sphere" : "interior", center + random_offset(gen, n, r));
        }
    }

    std::vector<Eigen::VectorXd> us;
    for (auto& pt : pts) us.push_back(clip_box(pt.second, opt.clip));
    // the center goes first and warm-starts everything else
    std::vector<EigResult> ers{min_eig_scaled_hessian(ctx, us[0], opt.eig)};
    if (us.size() > 1) {
        std::vector<Eigen::VectorXd> rest(us.begin() + 1, us.end());
        std::vector<EigResult> more = min_eig_scaled_hessian_batch(ctx, rest, opt.eig, &ers[0].vector);
        ers.insert(ers.end(), more.begin(), more.end());
    }
    rep.global_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
        ProbePoint p;
        p.id = static_cast<int>(j);
        p.kind = pts[j].first;
        p.radius = (us[j] - center).norm() / sqn;
        p.lambda_min = ers[j].value;
        p.matvecs = ers[j].matvecs;
        p.converged = ers[j].converged;
        rep.points.push_back(p);
        rep.global_min = std::min(rep.global_min, ers[j].value);
    }
    rep.probed = static_cast<int>(rep.points.size());
    rep.margin_c = rep.global_min;
    return rep;
}

NewtonResult newton_tap(const TapContext& ctx, const Eigen::VectorXd& z_init, const NewtonOptions& opt)
{
    const double n = ctx.n();
    NewtonResult out;
    Eigen::VectorXd z = z_init;
    Eigen::VectorXd m = z.array().tanh();
    Eigen::VectorXd g = gradient_from_z(ctx, z);
    double F = free_energy(ctx, m);
    const double lim = 1.0 - ctx.clamp_delta;

    for (int step = 0; step <= opt.max_steps; ++step) {
        out.grad_norm = g.norm();
        out.steps = step;
        if (out.grad_norm <= opt.tol) {
            out.converged = true;
            break;
        }
        if (step == opt.max_steps) break;

        ScaledHessian H(ctx, m);
        Eigen::VectorXd rhs = -n * g;
        Eigen::VectorXd pre = H.diagonal().cwiseInverse();
        CgResult cg = pcg(H.op(), rhs, pre, opt.cg_rel_tol, opt.cg_max_iter);
        out.cg_iterations += cg.iterations;
        const Eigen::VectorXd& dm = cg.x;
        // dm/dz = 1 - tanh^2 = sech^2, no cancellation near |m| = 1
        Eigen::VectorXd dz = dm.cwiseQuotient(z.unaryExpr([](double t) {
            double c = std::cosh(t);
            return 1.0 / (c * c);
        }));
        const double slope = g.dot(dm);  // directional derivative of F(tanh z) along dz

        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
            Eigen::VectorXd zt = z + alpha * dz;
            Eigen::VectorXd mt = zt.array().tanh();
            if (mt.cwiseAbs().maxCoeff() > lim) continue;
            double Ft = free_energy(ctx, mt);
            Eigen::VectorXd gt = gradient_from_z(ctx, zt);
            // near the solution F is flat to rounding, so also accept a
            // full step that shrinks the gradient
            bool armijo = Ft <= F + 1e-4 * alpha * slope + 1e-14 * std::abs(F);
            bool gdec = alpha == 1.0 && gt.norm() < out.grad_norm;
            if (armijo || gdec) {
                z = std::move(zt);
                m = std::move(mt);
                g = std::move(gt);
                F = Ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    out.z = z;
    out.m = m;
    return out;
}

StationaryReport find_stationary_point(const TapContext& ctx, const Eigen::VectorXd& m_init,
                                       const Eigen::VectorXd& center, double epsilon, int restarts,
                                       std::uint64_t seed, const NewtonOptions& opt)
{
    check_domain(ctx, m_init);
    const Eigen::Index n = ctx.n();
    const double sqn = std::sqrt(double(n));
    StationaryReport rep;
    Eigen::VectorXd z0 = m_init.unaryExpr([](double v) { return std::atanh(v); });
    rep.main = newton_tap(ctx, z0, opt);
    rep.dist_from_center = (rep.main.m - center).norm() / sqn;
    rep.max_abs = rep.main.m.cwiseAbs().maxCoeff();
    rep.in_ball = rep.dist_from_center <= epsilon;

    std::vector<Eigen::VectorXd> sols{rep.main.m};
    auto gen = substream(seed, "newton-restart");
    std::uniform_real_distribution<double> U(0.0, 1.0);
    rep.restarts = restarts;
    for (int r = 0; r < restarts; ++r) {
        Eigen::VectorXd start = clip_box(center + random_offset(gen, n, epsilon * U(gen)), 1e-6);
        Eigen::VectorXd zs = start.unaryExpr([](double v) { return std::atanh(v); });
        NewtonResult nr = newton_tap(ctx, zs, opt);
        if (nr.converged) ++rep.restarts_converged;
        rep.restart_max_dist = std::max(rep.restart_max_dist, (nr.m - rep.main.m).norm() / sqn);
        sols.push_back(nr.m);
    }
    for (std::size_t a = 0; a < sols.size(); ++a)
        for (std::size_t b = a + 1; b < sols.size(); ++b)
            rep.restart_pairwise_max = std::max(rep.restart_pairwise_max, (sols[a] - sols[b]).norm() / sqn);
    rep.unique = rep.main.converged && rep.restarts_converged == restarts && rep.restart_pairwise_max <= 1e-6;
    return rep;
}

Eigen::VectorXd gradient_from_trace(const TapContext& ctx, const AmpTrace& tr, int k)
{
    if (k < 1 || k > tr.k) throw DomainError("gradient_from_trace: bad k");
    const double n = ctx.n();
    const double l2 = ctx.lambda() * ctx.lambda();
    const Eigen::VectorXd m1 = tr.M.col(k - 1);
    const Eigen::VectorXd m2 = k >= 2 ? Eigen::VectorXd(tr.M.col(k - 2)) : Eigen::VectorXd::Zero(m1.size());
    const double Q = m1.squaredNorm() / n;
    Eigen::VectorXd g = -(tr.Z.col(k) - tr.Z.col(k - 1)) / n + (l2 / n) * (1.0 - Q) * (m1 - m2);
    if (ctx.variant == Variant::AMS) g += (l2 / n) * (Q - ctx.q_inf) * m1;
    return g;
}

}  // namespace tapscope
