#include "tapscope/amp.hpp"

#include <algorithm>
#include <cmath>

#include "tapscope/errors.hpp"
#include "tapscope/rng.hpp"

namespace tapscope {

AmpTrace run_amp_z2(const ModelInstance& inst, int k)
{
    if (k < 1) throw DomainError("run_amp_z2: k must be >= 1");
    const int n = inst.params.n;
    const double lam = inst.params.lambda;
    const double ch = chi(inst.params.variant);

    AmpTrace tr;
    tr.k = k;
    tr.variant = inst.params.variant;
    tr.lambda = lam;
    tr.gamma0 = inst.params.gamma0;
    tr.seed = inst.seed;
    tr.M.resize(n, k);
    tr.Z.resize(n, k + 1);
    tr.G.resize(n, k);
    tr.onsager.resize(k);

    tr.Z.col(0) = inst.y;
    Eigen::VectorXd mprev = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd m(n), Wm(n), Ym(n);
    for (int s = 0; s < k; ++s) {
        m = tr.Z.col(s).array().tanh();
        const double Q = m.squaredNorm() / n;
        const double bhat = lam * (1.0 - Q);
        Wm.noalias() = inst.W * m;
        Ym.noalias() = inst.Y * m;
        tr.M.col(s) = m;
        tr.onsager[s] = bhat;
        tr.G.col(s) = lam * Wm - (lam * lam * (1.0 - Q)) * mprev;
        tr.Z.col(s + 1) = lam * Ym + ch * inst.y - (lam * bhat) * mprev;
        if (!tr.Z.col(s + 1).allFinite())
            throw InvariantError("run_amp_z2: non-finite iterate at s=" + std::to_string(s + 1));
        mprev = m;
    }
    return tr;
}

GenericTrace run_amp_generic(const std::vector<Denoiser>& f, const Eigen::MatrixXd& onsager,
                             const Eigen::MatrixXd& W, const Eigen::VectorXd& g0, int k)
{
    const Eigen::Index n = W.rows();
    if (W.cols() != n || g0.size() != n) throw DomainError("run_amp_generic: dimension mismatch");
    if (static_cast<int>(f.size()) < k) throw DomainError("run_amp_generic: need k denoisers");
    if (onsager.rows() < k || onsager.cols() < k) throw DomainError("run_amp_generic: onsager must be k x k");

    GenericTrace tr;
    tr.M.resize(n, k);
    tr.G.resize(n, k + 1);
    tr.G.col(0) = g0;
    std::vector<double> row(k + 1);
    for (int s = 0; s < k; ++s) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j <= s; ++j) row[j] = tr.G(i, j);
            tr.M(i, s) = f[s](row.data(), s);
        }
        Eigen::VectorXd g = W * tr.M.col(s);
        for (int j = 1; j <= s; ++j) g -= onsager(s, j) * tr.M.col(j - 1);
        tr.G.col(s + 1) = g;
    }
    return tr;
}

EmpiricalJoint empirical_joint(const AmpTrace& tr, const ModelInstance& inst)
{
    const int n = tr.n(), k = tr.k;
    EmpiricalJoint ej;
    ej.rows.resize(n, 2 * k + 3);
    ej.rows.leftCols(k) = tr.M;
    ej.rows.middleCols(k, k) = tr.G;
    ej.rows.col(2 * k) = inst.g_side;
    ej.rows.col(2 * k + 1) = inst.x;
    ej.rows.col(2 * k + 2) = inst.y;
    ej.mean = ej.rows.colwise().mean().transpose();
    ej.second_moment = ej.rows.transpose() * ej.rows / double(n);
    return ej;
}

namespace {

double w2sq_1d(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t L = std::max(a.size(), b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
        double u = (i + 0.5) / L;
        double qa = a[std::min(a.size() - 1, static_cast<std::size_t>(u * a.size()))];
        double qb = b[std::min(b.size() - 1, static_cast<std::size_t>(u * b.size()))];
        acc += (qa - qb) * (qa - qb);
    }
    return acc / L;
}

}  // namespace

double sliced_w2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int directions, std::uint64_t seed)
{
    if (A.cols() != B.cols()) throw DomainError("sliced_w2: dimension mismatch");
    auto gen = substream(seed, "sliced-w2");
    double acc = 0.0;
    for (int d = 0; d < directions; ++d) {
        Eigen::VectorXd v = normal_vector(gen, A.cols());
        v.normalize();
        Eigen::VectorXd pa = A * v, pb = B * v;
        acc += w2sq_1d(std::vector<double>(pa.data(), pa.data() + pa.size()),
                       std::vector<double>(pb.data(), pb.data() + pb.size()));
    }
    return std::sqrt(acc / directions);
}

SeDiscrepancy empirical_vs_se(const AmpTrace& tr, const ModelInstance& inst, const SeCurve& curve,
                              const SeSample& sample, const Eigen::MatrixXd* Kp, int directions,
                              std::uint64_t seed)
{
    if (curve.k < tr.k) throw DomainError("empirical_vs_se: state evolution shorter than trace");
    const int n = tr.n(), k = tr.k;
    const double l2 = tr.lambda * tr.lambda;
    const Eigen::MatrixXd K = (Kp ? *Kp : curve.K).topLeftCorner(k, k);

    SeDiscrepancy r;
    Eigen::MatrixXd MM = tr.M.transpose() * tr.M / double(n);
    Eigen::MatrixXd GG = tr.G.transpose() * tr.G / double(n);
    r.mm_gap = (MM - K / l2).cwiseAbs().maxCoeff();
    r.gg_gap = (GG - K).cwiseAbs().maxCoeff();
    r.geometry_gap = (MM - GG / l2).cwiseAbs().maxCoeff();

    r.q_gap.resize(k);
    r.overlap_gap.resize(k);
    for (int s = 0; s < k; ++s) {
        const double qs = curve.overlaps[s];
        r.q_gap[s] = std::abs(MM(s, s) - qs);
        r.overlap_gap[s] = std::abs(inst.x.dot(tr.M.col(s)) / n - qs);
        r.max_q_gap = std::max(r.max_q_gap, r.q_gap[s]);
        r.max_overlap_gap = std::max(r.max_overlap_gap, r.overlap_gap[s]);
        r.max_onsager_gap = std::max(r.max_onsager_gap, std::abs(tr.onsager[s] - tr.lambda * (1.0 - qs)));
        r.max_g_mean = std::max(r.max_g_mean, std::abs(tr.G.col(s).mean()));
        if (s >= 1) {
            double inc = (tr.M.col(s) - tr.M.col(s - 1)).norm() / std::sqrt(double(n));
            double pred = std::sqrt(std::max(curve.overlaps[s] - curve.overlaps[s - 1], 0.0));
            r.max_increment_gap = std::max(r.max_increment_gap, std::abs(inc - pred));
        }
    }

    Eigen::MatrixXd emp(n, 2 * k + 1), ref(sample.N, 2 * k + 1);
    emp << tr.M, tr.G, inst.g_side;
    ref << sample.M.leftCols(k), sample.G.leftCols(k), sample.G0;
    r.sliced_w2 = sliced_w2(emp, ref, directions, seed);
    return r;
}

}  // namespace tapscope
