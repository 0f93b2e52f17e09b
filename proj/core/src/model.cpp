#include "tapscope/model.hpp"

#include <cmath>
#include <random>

#include "tapscope/errors.hpp"
#include "tapscope/rng.hpp"

namespace tapscope {

std::string to_string(Variant v) { return v == Variant::AMS ? "AMS" : "FMM"; }

Variant parse_variant(const std::string& s)
{
    if (s == "AMS" || s == "ams") return Variant::AMS;
    if (s == "FMM" || s == "fmm") return Variant::FMM;
    throw DomainError("unknown variant '" + s + "' (expected FMM or AMS)");
}

void ModelParams::validate() const
{
    if (n < 2) throw DomainError("n must be >= 2");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be > 0");
    if (!(gamma0 >= 0.0) || !std::isfinite(gamma0)) throw DomainError("gamma0 must be >= 0");
}

namespace {

Eigen::MatrixXd goe_from_stream(int n, std::mt19937_64& gen)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    const double off = 1.0 / std::sqrt(double(n));
    const double dia = std::sqrt(2.0 / double(n));
    Eigen::MatrixXd W(n, n);
    // column-major fill of the upper triangle, mirrored
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < j; ++i) {
            double v = off * nd(gen);
            W(i, j) = v;
            W(j, i) = v;
        }
        W(j, j) = dia * nd(gen);
    }
    return W;
}

}  // namespace

Eigen::MatrixXd sample_goe(int n, std::uint64_t seed)
{
    if (n < 2) throw DomainError("sample_goe: n must be >= 2");
    auto gen = substream(seed, "goe");
    return goe_from_stream(n, gen);
}

ModelInstance make_instance(const ModelParams& params, std::uint64_t seed)
{
    params.validate();
    const int n = params.n;
    ModelInstance inst;
    inst.params = params;
    inst.seed = seed;

    inst.x.resize(n);
    if (params.fix_spike_to_ones) {
        inst.x.setOnes();
    } else {
        auto gx = substream(seed, "spike");
        std::bernoulli_distribution b(0.5);
        for (int i = 0; i < n; ++i) inst.x[i] = b(gx) ? 1.0 : -1.0;
    }

    inst.W = sample_goe(n, seed);

    const double c = params.lambda / double(n);
    inst.Y.resize(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) inst.Y(i, j) = inst.W(i, j) + c * inst.x[i] * inst.x[j];

    auto gs = substream(seed, "side");
    inst.g_side = normal_vector(gs, n);
    const double sg = std::sqrt(params.gamma0);
    inst.y = params.gamma0 * inst.x + sg * inst.g_side;
    return inst;
}

}  // namespace tapscope
