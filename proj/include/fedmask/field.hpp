#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fedmask {

/// Prime field mod 2^61 - 1, the share domain for the Shamir baseline.
/// Native 64-bit storage with 128-bit intermediates; Mersenne reduction.
namespace field {

inline constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;

/// Value in [0, kPrime).
struct FieldElement {
  std::uint64_t v = 0;
  bool operator==(const FieldElement&) const = default;
};

FieldElement from_u64(std::uint64_t x);  // reduces mod p
FieldElement add(FieldElement a, FieldElement b);
FieldElement sub(FieldElement a, FieldElement b);
FieldElement mul(FieldElement a, FieldElement b);
FieldElement pow(FieldElement a, std::uint64_t e);
FieldElement inv(FieldElement a);  // throws DivisionByZero for a = 0

/// coeffs[0] + coeffs[1] x + ... evaluated at x.
FieldElement eval_poly(const std::vector<FieldElement>& coeffs, FieldElement x);

/// Lagrange interpolation of the points at x = 0. Points must have
/// pairwise-distinct x coordinates.
FieldElement interpolate_at_zero(const std::vector<std::pair<FieldElement, FieldElement>>& points);

/// Offset used to embed signed ring values into the field: v + 2^60.
inline constexpr std::uint64_t kEmbedOffset = std::uint64_t{1} << 60;

/// Embed a signed two's-complement ring element (assumed |value| < 2^59).
FieldElement embed_ring(std::uint64_t ring_elem);

/// Undo the embedding for a sum of n embedded values; returns the ring
/// representation of the signed sum.
std::uint64_t unembed_sum(FieldElement sum, std::uint64_t n_terms);

struct DivisionByZero : std::runtime_error {
  DivisionByZero() : std::runtime_error("field inverse of zero") {}
};

}  // namespace field
}  // namespace fedmask
