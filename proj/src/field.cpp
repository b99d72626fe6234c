#include "fedmask/field.hpp"

namespace fedmask::field {

namespace {

inline std::uint64_t reduce128(unsigned __int128 x) {
  // 2^61 = 1 mod p, so fold the high bits down twice.
  std::uint64_t lo = static_cast<std::uint64_t>(x) & kPrime;
  std::uint64_t hi = static_cast<std::uint64_t>(x >> 61);
  std::uint64_t r = lo + (hi & kPrime) + static_cast<std::uint64_t>(static_cast<unsigned __int128>(hi) >> 61);
  if (r >= kPrime) r -= kPrime;
  if (r >= kPrime) r -= kPrime;
  return r;
}

}  // namespace

FieldElement from_u64(std::uint64_t x) { return {reduce128(x)}; }

FieldElement add(FieldElement a, FieldElement b) {
  std::uint64_t r = a.v + b.v;
  if (r >= kPrime) r -= kPrime;
  return {r};
}

FieldElement sub(FieldElement a, FieldElement b) {
  std::uint64_t r = a.v >= b.v ? a.v - b.v : a.v + kPrime - b.v;
  return {r};
}

FieldElement mul(FieldElement a, FieldElement b) {
  return {reduce128(static_cast<unsigned __int128>(a.v) * b.v)};
}

FieldElement pow(FieldElement a, std::uint64_t e) {
  FieldElement r{1};
  FieldElement base = a;
  while (e) {
    if (e & 1) r = mul(r, base);
    base = mul(base, base);
    e >>= 1;
  }
  return r;
}

FieldElement inv(FieldElement a) {
  if (a.v == 0) throw DivisionByZero{};
  return pow(a, kPrime - 2);
}

FieldElement eval_poly(const std::vector<FieldElement>& coeffs, FieldElement x) {
  FieldElement r{0};
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) r = add(mul(r, x), *it);
  return r;
}

FieldElement interpolate_at_zero(const std::vector<std::pair<FieldElement, FieldElement>>& points) {
  FieldElement acc{0};
  for (std::size_t i = 0; i < points.size(); ++i) {
    FieldElement num{1};
    FieldElement den{1};
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      num = mul(num, sub({0}, points[j].first));
      den = mul(den, sub(points[i].first, points[j].first));
    }
    acc = add(acc, mul(points[i].second, mul(num, inv(den))));
  }
  return acc;
}

FieldElement embed_ring(std::uint64_t ring_elem) {
  const auto signed_v = static_cast<std::int64_t>(ring_elem);
  // signed_v + 2^60 is nonnegative for |signed_v| < 2^60 and < 2^61 - 1.
  const std::uint64_t shifted = static_cast<std::uint64_t>(signed_v + static_cast<std::int64_t>(kEmbedOffset));
  return from_u64(shifted);
}

std::uint64_t unembed_sum(FieldElement sum, std::uint64_t n_terms) {
  const FieldElement offset = mul(from_u64(kEmbedOffset), from_u64(n_terms));
  const FieldElement s = sub(sum, offset);
  // Map back to signed: values above p/2 represent negatives.
  if (s.v > kPrime / 2) {
    return static_cast<std::uint64_t>(-static_cast<std::int64_t>(kPrime - s.v));
  }
  return s.v;
}

}  // namespace fedmask::field
