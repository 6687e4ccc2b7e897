#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metadapt {

// All randomness flows from one run seed through named substreams, so
// ablation variants can share the data stream while drawing independent
// method randomness.

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

std::mt19937_64 substream(std::uint64_t seed, std::string_view name);

}  // namespace metadapt
