#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include <gmpxx.h>

namespace fedmask {

/// 32-byte pairwise seed derived from a DH shared secret. Both endpoints
/// of an edge derive the identical value; it keys the mask stream for
/// every later aggregation round.
struct SharedSeed {
  std::array<std::uint8_t, 32> bytes{};
  std::pair<int, int> pair{0, 0};  // smaller party id first

  bool operator==(const SharedSeed&) const = default;
};

struct DhGroup {
  mpz_class prime_modulus;
  mpz_class generator;
  int bit_length = 0;
};

struct DhKeypair {
  mpz_class priv;
  mpz_class pub;
};

struct InvalidPublicValue : std::runtime_error {
  InvalidPublicValue() : std::runtime_error("peer public value outside (1, p-1)") {}
};

/// RFC 3526 group 14 (2048-bit MODP safe prime, g = 2). Default group.
DhGroup dh_group_modp2048();
/// RFC 2409 Oakley group 1 (768-bit, g = 2). For fast tests.
DhGroup dh_group_modp768();
/// Construct an arbitrary group from decimal strings (toy groups in tests).
DhGroup dh_group_custom(const std::string& prime_dec, const std::string& generator_dec);

/// Private exponent uniform in [2, p-2]; public = g^priv mod p.
DhKeypair dh_keypair(const DhGroup& group, std::mt19937_64& rng);

/// SHA-256 of the big-endian encoding of peer_public^priv mod p.
/// Rejects degenerate peer values {0, 1, p-1} and anything >= p.
SharedSeed dh_shared(const mpz_class& priv, const mpz_class& peer_public, const DhGroup& group);

}  // namespace fedmask
