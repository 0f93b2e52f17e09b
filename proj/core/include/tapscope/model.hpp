#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace tapscope {

enum class Variant { FMM, AMS };

inline double chi(Variant v) { return v == Variant::AMS ? 1.0 : 0.0; }
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

// GOE(n) convention used everywhere: off-diagonal N(0, 1/n), diagonal N(0, 2/n).
// Spectral edge at 2, lambda = 1 spike transition.
inline constexpr const char* kGoeConvention =
    "GOE(n): W symmetric, W_ij ~ N(0,1/n) for i<j, W_ii ~ N(0,2/n)";

struct ModelParams {
    int n = 2000;
    double lambda = 1.5;
    double gamma0 = 0.3;
    Variant variant = Variant::AMS;
    bool fix_spike_to_ones = true;

    bool operator==(const ModelParams&) const = default;
    void validate() const;  // throws DomainError
};

struct ModelInstance {
    ModelParams params;
    Eigen::VectorXd x;
    Eigen::MatrixXd W;
    Eigen::MatrixXd Y;
    Eigen::VectorXd y;
    Eigen::VectorXd g_side;
    std::uint64_t seed = 0;
};

Eigen::MatrixXd sample_goe(int n, std::uint64_t seed);

ModelInstance make_instance(const ModelParams& params, std::uint64_t seed);

}  // namespace tapscope
