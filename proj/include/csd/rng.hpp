#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "csd/types.hpp"

namespace csd {

using Rng = std::mt19937_64;

/// Independent stream for one consumer, keyed by (root seed, module tag, index).
/// Adding a new consumer never perturbs the draws of existing ones.
Rng derive_stream(std::uint64_t root_seed, std::string_view tag, std::uint64_t index = 0);

Vector standard_normal(Rng& rng, Eigen::Index dim);

}  // namespace csd
