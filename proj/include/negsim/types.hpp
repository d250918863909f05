#pragma once

#include <cstdint>
#include <random>

namespace negsim {

// Simulated time in milliseconds.
using Millis = std::int64_t;
// Single-issue price in currency units.
using Price = double;
using AgentId = std::uint32_t;
using ThreadId = std::uint32_t;

using Rng = std::mt19937_64;

enum class Role : std::uint8_t { Buyer, Seller };

const char* to_string(Role role);

// Derives an independent generator from a master seed and a (stream, index)
// pair so that parallel or reordered consumers never share a sequence.
Rng derive_rng(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t index = 0);

double uniform(Rng& rng, double lo, double hi);

}  // namespace negsim
