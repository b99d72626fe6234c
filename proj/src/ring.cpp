#include "fedmask/ring.hpp"

#include <cmath>
#include <stdexcept>

namespace fedmask {

RingVector& RingVector::operator+=(const RingVector& o) {
  if (elems.size() != o.elems.size()) throw std::invalid_argument("RingVector size mismatch");
  for (std::size_t i = 0; i < elems.size(); ++i) elems[i] += o.elems[i];
  return *this;
}

RingVector& RingVector::operator-=(const RingVector& o) {
  if (elems.size() != o.elems.size()) throw std::invalid_argument("RingVector size mismatch");
  for (std::size_t i = 0; i < elems.size(); ++i) elems[i] -= o.elems[i];
  return *this;
}

std::uint64_t quantize(double x, const FixedPointCodec& codec) {
  if (x > codec.clamp_range) x = codec.clamp_range;
  if (x < -codec.clamp_range) x = -codec.clamp_range;
  const auto v = static_cast<std::int64_t>(std::llround(x * codec.scale()));
  return static_cast<std::uint64_t>(v);  // two's complement into the ring
}

double dequantize(std::uint64_t e, const FixedPointCodec& codec) {
  return static_cast<double>(static_cast<std::int64_t>(e)) / codec.scale();
}

RingVector quantize_vector(const Eigen::VectorXd& v, const FixedPointCodec& codec) {
  RingVector out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = quantize(v[i], codec);
  return out;
}

Eigen::VectorXd dequantize_vector(const RingVector& v, const FixedPointCodec& codec) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = dequantize(v[i], codec);
  return out;
}

}  // namespace fedmask
