#include "csd/rng.hpp"

#include <vector>

namespace csd {

Rng derive_stream(std::uint64_t root_seed, std::string_view tag, std::uint64_t index) {
    std::vector<std::uint32_t> material{
        static_cast<std::uint32_t>(root_seed),
        static_cast<std::uint32_t>(root_seed >> 32),
        static_cast<std::uint32_t>(index),
        static_cast<std::uint32_t>(index >> 32),
    };
    for (const char c : tag) material.push_back(static_cast<unsigned char>(c));
    std::seed_seq seq(material.begin(), material.end());
    return Rng(seq);
}

Vector standard_normal(Rng& rng, Eigen::Index dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim);
    for (Eigen::Index k = 0; k < dim; ++k) v[k] = normal(rng);
    return v;
}

}  // namespace csd
