#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace fedmask {

/// Fixed-point encoding of reals into the 2^64 wrap-around ring.
///
/// Secrets, masks and aggregates all live in this ring so that pairwise
/// masks cancel bit-exactly; floating-point masks cannot. Values beyond
/// clamp_range are clamped (and counted), never rejected, so a training
/// loop survives outlier activations.
struct FixedPointCodec {
  int frac_bits = 20;
  double clamp_range = 1024.0;  // 2^10; leaves 33 headroom bits for sums

  double scale() const { return static_cast<double>(std::uint64_t{1} << frac_bits); }
};

/// Vector of 64-bit ring elements. Addition/subtraction wrap mod 2^64.
struct RingVector {
  std::vector<std::uint64_t> elems;

  RingVector() = default;
  explicit RingVector(std::size_t n) : elems(n, 0) {}
  explicit RingVector(std::vector<std::uint64_t> v) : elems(std::move(v)) {}

  std::size_t size() const { return elems.size(); }
  std::uint64_t& operator[](std::size_t i) { return elems[i]; }
  std::uint64_t operator[](std::size_t i) const { return elems[i]; }

  RingVector& operator+=(const RingVector& o);
  RingVector& operator-=(const RingVector& o);
  friend RingVector operator+(RingVector a, const RingVector& b) { return a += b; }
  friend RingVector operator-(RingVector a, const RingVector& b) { return a -= b; }
  bool operator==(const RingVector& o) const { return elems == o.elems; }
};

std::uint64_t quantize(double x, const FixedPointCodec& codec);
double dequantize(std::uint64_t e, const FixedPointCodec& codec);

RingVector quantize_vector(const Eigen::VectorXd& v, const FixedPointCodec& codec);
Eigen::VectorXd dequantize_vector(const RingVector& v, const FixedPointCodec& codec);

}  // namespace fedmask
