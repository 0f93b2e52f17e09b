#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace tapscope {

std::uint64_t splitmix64(std::uint64_t x);

// Stream key for (seed, tag). Tags name the consumer ("goe", "spike", ...),
// so adding a new consumer never shifts the draws of an existing one.
std::uint64_t stream_key(std::uint64_t seed, std::string_view tag);

std::mt19937_64 substream(std::uint64_t seed, std::string_view tag);

Eigen::VectorXd normal_vector(std::mt19937_64& gen, Eigen::Index n);

}  // namespace tapscope
