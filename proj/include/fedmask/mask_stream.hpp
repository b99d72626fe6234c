#pragma once

#include <cstdint>

#include "fedmask/dh.hpp"
#include "fedmask/ring.hpp"

namespace fedmask {

/// Deterministic hash-based PRF stream keyed by a pairwise seed.
///
/// Element block b is SHA-256(seed || round_le64 || b_le64), yielding four
/// 64-bit ring elements per hash. Identical (seed, round, length) always
/// reproduces the same vector; distinct rounds give independent streams,
/// which is what lets one DH exchange serve every aggregation round.
RingVector mask_stream(const SharedSeed& seed, std::uint64_t round, std::size_t length);

}  // namespace fedmask
