#include "fedmask/dh.hpp"

#include <openssl/sha.h>

#include <vector>

namespace fedmask {

namespace {

// RFC 3526, section 3.
constexpr const char* kModp2048Hex =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D"
    "C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D"
    "670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9"
    "DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AACAA68FFFFFFFFFFFFFFFF";

// RFC 2409, section 6.1.
constexpr const char* kModp768Hex =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A63A3620FFFFFFFFFFFFFFFF";

}  // namespace

DhGroup dh_group_modp2048() {
  DhGroup g;
  g.prime_modulus = mpz_class(kModp2048Hex, 16);
  g.generator = 2;
  g.bit_length = 2048;
  return g;
}

DhGroup dh_group_modp768() {
  DhGroup g;
  g.prime_modulus = mpz_class(kModp768Hex, 16);
  g.generator = 2;
  g.bit_length = 768;
  return g;
}

DhGroup dh_group_custom(const std::string& prime_dec, const std::string& generator_dec) {
  DhGroup g;
  g.prime_modulus = mpz_class(prime_dec, 10);
  g.generator = mpz_class(generator_dec, 10);
  g.bit_length = static_cast<int>(mpz_sizeinbase(g.prime_modulus.get_mpz_t(), 2));
  return g;
}

DhKeypair dh_keypair(const DhGroup& group, std::mt19937_64& rng) {
  // Uniform in [2, p-2] by rejection over fixed-width draws.
  const mpz_class span = group.prime_modulus - 4;  // |[2, p-2]| - 1
  const std::size_t nbits = mpz_sizeinbase(span.get_mpz_t(), 2);
  const std::size_t nwords = (nbits + 63) / 64;
  mpz_class candidate;
  std::vector<std::uint64_t> words(nwords);
  do {
    for (auto& w : words) w = rng();
    mpz_import(candidate.get_mpz_t(), nwords, -1, sizeof(std::uint64_t), 0, 0, words.data());
    mpz_tdiv_r_2exp(candidate.get_mpz_t(), candidate.get_mpz_t(), nbits);
  } while (candidate > span);
  DhKeypair kp;
  kp.priv = candidate + 2;
  mpz_powm(kp.pub.get_mpz_t(), group.generator.get_mpz_t(), kp.priv.get_mpz_t(),
           group.prime_modulus.get_mpz_t());
  return kp;
}

SharedSeed dh_shared(const mpz_class& priv, const mpz_class& peer_public, const DhGroup& group) {
  if (peer_public <= 1 || peer_public >= group.prime_modulus - 1) throw InvalidPublicValue{};
  mpz_class shared;
  mpz_powm(shared.get_mpz_t(), peer_public.get_mpz_t(), priv.get_mpz_t(),
           group.prime_modulus.get_mpz_t());

  std::size_t count = 0;
  std::vector<std::uint8_t> be((mpz_sizeinbase(shared.get_mpz_t(), 2) + 7) / 8 + 1);
  mpz_export(be.data(), &count, 1, 1, 1, 0, shared.get_mpz_t());
  SharedSeed seed;
  SHA256(be.data(), count, seed.bytes.data());
  return seed;
}

}  // namespace fedmask
