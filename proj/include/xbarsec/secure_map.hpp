#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "xbarsec/crossbar.hpp"
#include "xbarsec/tensor.hpp"

namespace xbarsec {

// Where one PE's worth of a layer's (m, n) VMM matrix lands. Public
// structure: the adversary knows it.
struct TileGeometry {
  std::size_t row_tile = 0;
  std::size_t col_tile = 0;
  std::size_t row0 = 0;  // first logical matrix row held
  std::size_t col0 = 0;  // first logical matrix column held
  std::size_t rows = 0;  // real rows held
  std::size_t cols = 0;  // real columns held
  bool padded = false;   // real rows/cols are scattered among fake ones

  friend bool operator==(const TileGeometry&, const TileGeometry&) = default;
};

struct LayerPlan {
  std::size_t rows = 0;  // m
  std::size_t cols = 0;  // n
  bool protect = true;
};

// Tiles of an (m, n) matrix in row-tile-major order.
std::vector<TileGeometry> plan_tiles(const LayerPlan& plan, const CrossbarConfig& config);

// Key material of one tile (one PE). transform holds k x data_cols bits in
// block-major order; bit (b, j) covers rows [b*x, (b+1)*x) of physical data
// column j in every crossbar group. Masks are empty unless the tile is padded.
struct TileKey {
  std::size_t blocks = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> transform;
  std::vector<std::uint8_t> row_mask;  // config.rows bits
  std::vector<std::uint8_t> col_mask;  // config.data_cols() bits

  bool bit(std::size_t block, std::size_t col) const { return transform[block * cols + col] != 0; }
  void set_bit(std::size_t block, std::size_t col, bool v) {
    transform[block * cols + col] = v ? 1 : 0;
  }
  bool padded() const { return !row_mask.empty(); }

  friend bool operator==(const TileKey&, const TileKey&) = default;
};

struct LayerKeys {
  bool protect = false;
  std::vector<TileKey> tiles;
  friend bool operator==(const LayerKeys&, const LayerKeys&) = default;
};

struct KeyStore {
  CrossbarConfig config;
  std::uint64_t seed = 0;
  std::vector<LayerKeys> layers;

  // log2 of the brute-force trial count over all transform bits and masks.
  std::size_t total_key_bits() const;
  friend bool operator==(const KeyStore&, const KeyStore&) = default;
};

// Uniform random transform bits (and masks for padded tiles) for every
// protected layer; unprotected layers get all-zero bits. Deterministic in seed.
KeyStore generate_keys(const CrossbarConfig& config, std::span<const LayerPlan> layers,
                       std::uint64_t seed);

// A key store whose transform bits are all zero and which pads nothing:
// the unprotected mapping.
KeyStore zero_keys(const CrossbarConfig& config, std::span<const LayerPlan> layers);

// 2^p - 1 - w for 0 <= w < 2^p.
std::uint32_t encode_scheme1(std::uint32_t w, int bits);
// 2^b - 1 - c for a conductance level 0 <= c < 2^b.
std::uint16_t encode_scheme2(std::uint16_t c, int device_bits);

// Places the real matrix at the mask positions (relative order preserved)
// and fills every other cell uniformly from [min(w), max(w)].
QuantTensor pad_matrix(const QuantTensor& w, std::size_t rows, std::size_t cols,
                       std::mt19937_64& rng, std::span<const std::uint8_t> row_mask,
                       std::span<const std::uint8_t> col_mask);

// One PE: G crossbar groups. Where the real rows and columns of a padded
// tile sit is key material and lives in the TileKey, not here.
struct MappedTile {
  TileGeometry geom;
  std::vector<CrossbarTile> groups;
};

struct MappedLayer {
  LayerGeometry geom;
  bool protect = false;
  std::size_t row_tiles = 0;
  std::size_t col_tiles = 0;
  // Scheme 1 offset added to every weight before slicing; 0 for scheme 2.
  std::int64_t bias_offset = 0;
  std::vector<MappedTile> tiles;

  const MappedTile& tile(std::size_t r, std::size_t c) const { return tiles[r * col_tiles + c]; }
};

struct MappedModel {
  CrossbarConfig config;
  std::vector<MappedLayer> layers;
};

std::int64_t scheme1_bias_offset(int weight_bits);

// Physical positions of the set bits of a mask, or the prefix [0, count)
// when the mask is empty.
std::vector<std::size_t> mask_positions(std::span<const std::uint8_t> mask, std::size_t count);

MappedLayer map_layer(const LayerSpec& layer, const CrossbarConfig& config,
                      const LayerKeys& keys, std::uint64_t pad_seed);

// Layers are mapped against keys.layers[i]; padding draws from a generator
// seeded from keys.seed so the whole mapping is reproducible.
MappedModel map_model(std::span<const LayerSpec> layers, const CrossbarConfig& config,
                      const KeyStore& keys);

// Inverse mapping read purely from the conductances, the public geometry
// and the given keys: complement the blocks the keys mark, recombine the
// slices, remove the scheme-1 offset, and gather the real rows/columns the
// masks point at. With the true keys this returns the original matrix.
QuantTensor demap_layer(const MappedLayer& layer, const CrossbarConfig& config,
                        const LayerKeys& keys);

std::vector<LayerPlan> plans_of(std::span<const LayerSpec> layers, const std::vector<bool>& protect = {});

}  // namespace xbarsec
