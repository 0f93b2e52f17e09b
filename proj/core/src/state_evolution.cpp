#include "tapscope/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tapscope/errors.hpp"
#include "tapscope/quadrature.hpp"
#include "tapscope/rng.hpp"

namespace tapscope {

namespace {

double tanh2(double t)
{
    double h = std::tanh(t);
    return h * h;
}

void check_chi(double chi)
{
    if (chi != 0.0 && chi != 1.0) throw DomainError("chi must be 0 (FMM) or 1 (AMS)");
}

}  // namespace

double se_map(double lambda, double gamma0, double chi, double gamma, int order)
{
    double e = gaussian_expectation(tanh2, gamma, gamma, order);
    return lambda * lambda * e + chi * gamma0;
}

SeCurve run_recursion(double lambda, double gamma0, double chi, int k, int order)
{
    if (k < 1) throw DomainError("run_recursion: k must be >= 1");
    if (!(lambda > 0.0)) throw DomainError("run_recursion: lambda must be > 0");
    if (!(gamma0 >= 0.0)) throw DomainError("run_recursion: gamma0 must be >= 0");
    check_chi(chi);

    SeCurve c;
    c.lambda = lambda;
    c.gamma0 = gamma0;
    c.chi = chi;
    c.k = k;
    // gamma_s <= lambda^2 + gamma0 for every s, so one order serves the whole curve
    c.quadrature_order = order_for_variance(lambda * lambda + gamma0, order);

    c.gammas.resize(k + 1);
    c.gammas[0] = gamma0;
    for (int s = 0; s < k; ++s)
        c.gammas[s + 1] = se_map(lambda, gamma0, chi, c.gammas[s], c.quadrature_order);

    const double l2 = lambda * lambda;
    c.overlaps.resize(k);
    for (int s = 0; s < k; ++s) c.overlaps[s] = (c.gammas[s + 1] - chi * gamma0) / l2;

    c.Gamma.resize(k, k);
    c.K.resize(k, k);
    for (int s = 1; s <= k; ++s)
        for (int t = 1; t <= k; ++t) {
            double g = c.gammas[std::min(s, t)];
            c.Gamma(s - 1, t - 1) = g;
            c.K(s - 1, t - 1) = g - chi * gamma0;
        }
    return c;
}

FixedPointConstants solve_fixed_point(double lambda, double gamma0, double chi, int order)
{
    check_chi(chi);
    if (!(lambda > 0.0) || !(gamma0 >= 0.0)) throw DomainError("solve_fixed_point: bad parameters");
    if (chi == 0.0 && lambda <= 1.0)
        throw RegimeError("FMM with lambda <= 1: only the trivial fixed point gamma = 0 exists");
    if (chi == 1.0 && gamma0 <= 0.0)
        throw RegimeError("AMS with gamma0 = 0: the fixed point degenerates to gamma = 0");

    FixedPointConstants out;
    const double hi0 = lambda * lambda + chi * gamma0;
    const int ord = order_for_variance(hi0, order);
    out.quadrature_order = ord;
    auto rhs = [&](double g) { return se_map(lambda, gamma0, chi, g, ord); };

    // start from the upper bound so FMM never drifts to the trivial root
    double g = hi0;
    bool ok = false;
    int it = 0;
    for (; it < 500; ++it) {
        double r = rhs(g);
        if (std::abs(g - r) <= 1e-12) {
            ok = true;
            break;
        }
        g = 0.5 * g + 0.5 * r;
    }
    out.iterations = it;

    if (!ok) {
        // g(gamma) = gamma - rhs(gamma) is < 0 at lo and > 0 at hi
        double lo = chi == 1.0 ? gamma0 : 1e-12;
        double hi = hi0;
        for (int b = 0; b < 300 && hi - lo > 1e-15 * hi; ++b) {
            double mid = 0.5 * (lo + hi);
            if (mid - rhs(mid) < 0.0) lo = mid;
            else hi = mid;
        }
        double rl = std::abs(lo - rhs(lo)), rh = std::abs(hi - rhs(hi));
        g = rl < rh ? lo : hi;
        out.used_bisection = true;
    }

    out.gamma_inf = g;
    out.residual = std::abs(g - rhs(g));
    out.q_inf = gaussian_expectation(tanh2, g, g, ord);
    out.b_inf = gaussian_expectation([](double t) { double h = std::tanh(t); return h * h * h * h; }, g, g, ord);
    out.K_inf = g - chi * gamma0;
    double e1 = gaussian_expectation([](double t) { return std::tanh(t); }, g, g, ord);
    double e3 = gaussian_expectation([](double t) { double h = std::tanh(t); return h * h * h; }, g, g, ord);
    out.q_identity_residual = out.q_inf - e1;
    out.b_identity_residual = out.b_inf - e3;
    return out;
}

Eigen::Matrix2d noise_covariance(const SeCurve& c, const Eigen::MatrixXd& K, int s, int t)
{
    auto a = [&](int i) { return i == 0 ? 1.0 : c.chi; };
    auto kk = [&](int i, int j) { return (i >= 1 && j >= 1) ? K(i - 1, j - 1) : 0.0; };
    Eigen::Matrix2d C;
    C(0, 0) = kk(s, s) + a(s) * a(s) * c.gamma0;
    C(1, 1) = kk(t, t) + a(t) * a(t) * c.gamma0;
    C(0, 1) = C(1, 0) = kk(s, t) + a(s) * a(t) * c.gamma0;
    return C;
}

double cross_moment(const SeCurve& c, const Eigen::MatrixXd& K, int s, int t, int order)
{
    if (s < 0 || t < 0 || s >= c.k || t >= c.k) throw DomainError("cross_moment: index out of range");
    Eigen::Matrix2d C = noise_covariance(c, K, s, t);
    const double ms = c.gammas[s], mt = c.gammas[t];
    const double vs = std::max(C(0, 0), 0.0);
    const double sd = std::sqrt(vs);
    double a = 0.0, b;
    if (sd > 0.0) {
        a = C(0, 1) / sd;
        b = std::sqrt(std::max(C(1, 1) - a * a, 0.0));
    } else {
        b = std::sqrt(std::max(C(1, 1), 0.0));
    }
    const int ord = order_for_variance(std::max(vs, C(1, 1)), order);
    double e = gaussian_expectation_2d(
        [&](double g1, double g2) { return std::tanh(ms + sd * g1) * std::tanh(mt + a * g1 + b * g2); },
        ord, ord);
    return c.lambda * c.lambda * e;
}

Eigen::MatrixXd joint_covariance(const SeCurve& c, int order)
{
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(c.k, c.k);
    for (int i = 0; i < c.k; ++i)
        for (int j = 0; j <= i; ++j) {
            // row i only reads J(i-1, .) and earlier, already filled
            double v = cross_moment(c, J, i, j, order);
            J(i, j) = v;
            J(j, i) = v;
        }
    return J;
}

SeSample sample_se(const SeCurve& c, int N, std::uint64_t seed) { return sample_se(c, c.K, N, seed); }

SeSample sample_se(const SeCurve& c, const Eigen::MatrixXd& K, int N, std::uint64_t seed)
{
    if (N < 1) throw DomainError("sample_se: N must be >= 1");
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) throw InvariantError("sample_se: K is not positive definite");
    Eigen::MatrixXd L = llt.matrixL();

    auto gen = substream(seed, "se-sample");
    SeSample out;
    out.N = N;
    Eigen::MatrixXd Z(N, c.k);
    for (int j = 0; j < c.k; ++j) Z.col(j) = normal_vector(gen, N);
    out.G = Z * L.transpose();
    out.G0 = normal_vector(gen, N);
    out.Xi = normal_vector(gen, N);

    const double sg0 = std::sqrt(c.gamma0);
    out.M.resize(N, c.k);
    for (int i = 0; i < N; ++i) {
        out.M(i, 0) = std::tanh(c.gamma0 + sg0 * out.G0[i]);
        for (int s = 1; s < c.k; ++s)
            out.M(i, s) = std::tanh(c.gammas[s] + out.G(i, s - 1) + c.chi * sg0 * out.G0[i]);
    }
    return out;
}

GenericSe generic_se(const std::vector<Denoiser>& f, int k, int N, std::uint64_t seed, double h)
{
    if (k < 1) throw DomainError("generic_se: k must be >= 1");
    if (static_cast<int>(f.size()) < k) throw DomainError("generic_se: need k denoisers");
    if (N < 2) throw DomainError("generic_se: N must be >= 2");

    auto gen = substream(seed, "generic-se");
    Eigen::MatrixXd Gv = Eigen::MatrixXd::Zero(N, k + 1);  // col 0 = G_0, col s = G_s
    Gv.col(0) = normal_vector(gen, N);
    Eigen::MatrixXd Z(N, k);
    for (int j = 0; j < k; ++j) Z.col(j) = normal_vector(gen, N);

    GenericSe out;
    out.K = Eigen::MatrixXd::Zero(k, k);
    out.onsager = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd F(N, k);
    std::vector<double> row(k + 1);

    for (int s = 0; s < k; ++s) {
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j <= s; ++j) row[j] = Gv(i, j);
            F(i, s) = f[s](row.data(), s);
            for (int j = 0; j <= s; ++j) {
                double keep = row[j];
                row[j] = keep + h;
                double up = f[s](row.data(), s);
                row[j] = keep - h;
                double dn = f[s](row.data(), s);
                row[j] = keep;
                out.onsager(s, j) += (up - dn) / (2.0 * h);
            }
        }
        for (int j = 0; j <= s; ++j) out.onsager(s, j) /= N;
        for (int t = 0; t <= s; ++t) {
            double v = F.col(s).dot(F.col(t)) / N;
            out.K(s, t) = v;
            out.K(t, s) = v;
        }
        if (s + 1 < k) {
            Eigen::LLT<Eigen::MatrixXd> llt(out.K.topLeftCorner(s + 1, s + 1));
            if (llt.info() != Eigen::Success)
                throw InvariantError("generic_se: K_{<=" + std::to_string(s + 1) + "} is not positive definite");
            Eigen::MatrixXd L = llt.matrixL();
            Gv.col(s + 1) = Z.leftCols(s + 1) * L.row(s).transpose();
        }
    }
    return out;
}

}  // namespace tapscope
