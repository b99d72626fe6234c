#include "fedmask/mask_stream.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstring>

namespace fedmask {

RingVector mask_stream(const SharedSeed& seed, std::uint64_t round, std::size_t length) {
  RingVector out(length);
  std::array<std::uint8_t, 48> msg{};
  std::memcpy(msg.data(), seed.bytes.data(), 32);
  for (int i = 0; i < 8; ++i) msg[32 + i] = static_cast<std::uint8_t>(round >> (8 * i));

  std::array<std::uint8_t, 32> digest{};
  for (std::size_t block = 0; block * 4 < length; ++block) {
    for (int i = 0; i < 8; ++i) msg[40 + i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(block) >> (8 * i));
    SHA256(msg.data(), msg.size(), digest.data());
    for (std::size_t j = 0; j < 4 && block * 4 + j < length; ++j) {
      std::uint64_t w = 0;
      std::memcpy(&w, digest.data() + 8 * j, 8);
      out[block * 4 + j] = w;
    }
  }
  return out;
}

}  // namespace fedmask
