#include "tapscope/rng.hpp"

namespace tapscope {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t seed, std::string_view tag)
{
    // FNV-1a over the tag, then two splitmix rounds to decorrelate from seed
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(seed) ^ h);
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view tag)
{
    std::uint64_t k = stream_key(seed, tag);
    std::seed_seq sq{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                     static_cast<std::uint32_t>(splitmix64(k)),
                     static_cast<std::uint32_t>(splitmix64(k) >> 32)};
    return std::mt19937_64(sq);
}

Eigen::VectorXd normal_vector(std::mt19937_64& gen, Eigen::Index n)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(gen);
    return v;
}

}  // namespace tapscope
