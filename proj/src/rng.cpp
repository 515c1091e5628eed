#include "xbarsec/rng.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include <sodium.h>

#include "xbarsec/error.hpp"

namespace xbarsec {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

void store_le(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

}  // namespace

SecureStream::SecureStream(std::uint64_t seed, std::uint64_t stream_id) {
  ensure_sodium();
  unsigned char material[16];
  store_le(material, seed);
  store_le(material + 8, stream_id);
  crypto_generichash(key_.data(), key_.size(), material, sizeof material, nullptr, 0);
  static_assert(sizeof(nonce_) == crypto_stream_chacha20_ietf_NONCEBYTES);
}

void SecureStream::refill() {
  // 16 ChaCha20 blocks per refill; the block counter keeps streams disjoint.
  crypto_stream_chacha20_ietf_xor_ic(buf_.data(), std::array<unsigned char, 1024>{}.data(),
                                     buf_.size(), nonce_.data(), counter_, key_.data());
  counter_ += static_cast<std::uint32_t>(buf_.size() / 64);
  pos_ = 0;
}

std::uint64_t SecureStream::next_u64() {
  if (pos_ + 8 > buf_.size()) refill();
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
  pos_ += 8;
  return v;
}

bool SecureStream::next_bit() {
  if (bits_left_ == 0) {
    bits_ = next_u64();
    bits_left_ = 64;
  }
  const bool b = bits_ & 1u;
  bits_ >>= 1;
  --bits_left_;
  return b;
}

std::uint64_t SecureStream::uniform(std::uint64_t bound) {
  require(bound > 0, "uniform: bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

std::vector<std::size_t> choose_positions(SecureStream& rng, std::size_t total, std::size_t count) {
  require(count <= total, "choose_positions: count exceeds total");
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` slots end up a uniform subset.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform(total - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace xbarsec
