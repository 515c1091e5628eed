#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace xbarsec {

// Deterministic ChaCha20 keystream keyed by BLAKE2b(seed, stream id).
// Used for key material; distinct stream ids give independent streams
// from one seed.
class SecureStream {
 public:
  SecureStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  bool next_bit();
  // Uniform in [0, bound), rejection sampled. bound > 0.
  std::uint64_t uniform(std::uint64_t bound);

 private:
  void refill();

  std::array<unsigned char, 32> key_{};
  std::array<unsigned char, 12> nonce_{};
  std::uint32_t counter_ = 0;
  std::array<unsigned char, 1024> buf_{};
  std::size_t pos_ = 1024;
  std::uint64_t bits_ = 0;
  int bits_left_ = 0;
};

// Sorted positions of `count` distinct slots chosen out of `total`.
std::vector<std::size_t> choose_positions(SecureStream& rng, std::size_t total, std::size_t count);

// SplitMix64 finalizer; derives child seeds for independent trials.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace xbarsec
