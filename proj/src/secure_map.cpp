#include "xbarsec/secure_map.hpp"

#include <algorithm>
#include <string>

#include "xbarsec/error.hpp"
#include "xbarsec/rng.hpp"

namespace xbarsec {

std::vector<TileGeometry> plan_tiles(const LayerPlan& plan, const CrossbarConfig& config) {
  require(plan.rows > 0 && plan.cols > 0, "layer matrix must be non-empty");
  const std::size_t tr = config.rows;
  const std::size_t tc = config.data_cols();
  const std::size_t row_tiles = (plan.rows + tr - 1) / tr;
  const std::size_t col_tiles = (plan.cols + tc - 1) / tc;
  std::vector<TileGeometry> out;
  out.reserve(row_tiles * col_tiles);
  for (std::size_t r = 0; r < row_tiles; ++r) {
    for (std::size_t c = 0; c < col_tiles; ++c) {
      TileGeometry g;
      g.row_tile = r;
      g.col_tile = c;
      g.row0 = r * tr;
      g.col0 = c * tc;
      g.rows = std::min(tr, plan.rows - g.row0);
      g.cols = std::min(tc, plan.cols - g.col0);
      g.padded = plan.protect && config.pad_small && (g.rows < tr || g.cols < tc);
      out.push_back(g);
    }
  }
  return out;
}

std::size_t KeyStore::total_key_bits() const {
  std::size_t bits = 0;
  for (const auto& layer : layers) {
    if (!layer.protect) continue;
    for (const auto& t : layer.tiles) bits += t.transform.size() + t.row_mask.size() + t.col_mask.size();
  }
  return bits;
}

namespace {

TileKey empty_tile_key(const CrossbarConfig& config) {
  TileKey k;
  k.blocks = config.blocks();
  k.cols = config.data_cols();
  k.transform.assign(k.blocks * k.cols, 0);
  return k;
}

std::vector<std::uint8_t> mask_from(std::span<const std::size_t> pos, std::size_t total) {
  std::vector<std::uint8_t> m(total, 0);
  for (auto p : pos) m[p] = 1;
  return m;
}

}  // namespace

KeyStore generate_keys(const CrossbarConfig& config, std::span<const LayerPlan> layers,
                       std::uint64_t seed) {
  config.validate();
  KeyStore ks;
  ks.config = config;
  ks.seed = seed;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerKeys lk;
    lk.protect = layers[l].protect;
    SecureStream rng(seed, l);
    for (const auto& g : plan_tiles(layers[l], config)) {
      TileKey k = empty_tile_key(config);
      if (lk.protect) {
        for (auto& b : k.transform) b = rng.next_bit() ? 1 : 0;
        if (g.padded) {
          k.row_mask = mask_from(choose_positions(rng, config.rows, g.rows), config.rows);
          k.col_mask =
              mask_from(choose_positions(rng, config.data_cols(), g.cols), config.data_cols());
        }
      }
      lk.tiles.push_back(std::move(k));
    }
    ks.layers.push_back(std::move(lk));
  }
  return ks;
}

KeyStore zero_keys(const CrossbarConfig& config, std::span<const LayerPlan> layers) {
  config.validate();
  KeyStore ks;
  ks.config = config;
  for (const auto& plan : layers) {
    LayerKeys lk;
    lk.protect = false;
    LayerPlan unprotected = plan;
    unprotected.protect = false;
    for (std::size_t t = 0; t < plan_tiles(unprotected, config).size(); ++t) {
      lk.tiles.push_back(empty_tile_key(config));
    }
    ks.layers.push_back(std::move(lk));
  }
  return ks;
}

std::uint32_t encode_scheme1(std::uint32_t w, int bits) {
  require(bits >= 1 && bits <= 16, "encode_scheme1: bits must be in [1, 16]");
  const std::uint32_t top = (1u << bits) - 1;
  require(w <= top, "encode_scheme1: value " + std::to_string(w) + " outside [0, 2^" +
                        std::to_string(bits) + ")");
  return top - w;
}

std::uint16_t encode_scheme2(std::uint16_t c, int device_bits) {
  require(device_bits >= 1 && device_bits <= 16, "encode_scheme2: device bits must be in [1, 16]");
  const std::uint32_t top = (1u << device_bits) - 1;
  require(c <= top, "encode_scheme2: level " + std::to_string(c) + " outside device range");
  return static_cast<std::uint16_t>(top - c);
}

std::vector<std::size_t> mask_positions(std::span<const std::uint8_t> mask, std::size_t count) {
  std::vector<std::size_t> pos;
  if (mask.empty()) {
    pos.resize(count);
    for (std::size_t i = 0; i < count; ++i) pos[i] = i;
    return pos;
  }
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) pos.push_back(i);
  }
  require(pos.size() == count, "mask selects " + std::to_string(pos.size()) +
                                   " positions, expected " + std::to_string(count));
  return pos;
}

QuantTensor pad_matrix(const QuantTensor& w, std::size_t rows, std::size_t cols,
                       std::mt19937_64& rng, std::span<const std::uint8_t> row_mask,
                       std::span<const std::uint8_t> col_mask) {
  require(w.rank() == 2, "pad_matrix: input must be a matrix");
  require(w.rows() <= rows && w.cols() <= cols, "pad_matrix: matrix larger than target");
  require(row_mask.size() == rows && col_mask.size() == cols, "pad_matrix: mask length mismatch");
  const auto rpos = mask_positions(row_mask, w.rows());
  const auto cpos = mask_positions(col_mask, w.cols());

  const std::int32_t lo = w.min_value();
  const std::int32_t hi = w.max_value();
  std::uniform_int_distribution<std::int32_t> fake(lo, hi);
  std::vector<std::int32_t> out(rows * cols);
  for (auto& v : out) v = fake(rng);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) out[rpos[i] * cols + cpos[j]] = w.at(i, j);
  }
  return QuantTensor({rows, cols}, std::move(out), w.bits(), w.is_signed());
}

std::int64_t scheme1_bias_offset(int weight_bits) { return std::int64_t{1} << (weight_bits - 1); }

namespace {

void check_keys_fit(const LayerKeys& keys, const std::vector<TileGeometry>& tiles,
                    const CrossbarConfig& config) {
  require(keys.tiles.size() == tiles.size(),
          "key store has " + std::to_string(keys.tiles.size()) + " tiles for a layer with " +
              std::to_string(tiles.size()));
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& k = keys.tiles[t];
    require(k.blocks == config.blocks() && k.cols == config.data_cols() &&
                k.transform.size() == k.blocks * k.cols,
            "tile key shape does not match the crossbar geometry");
    require(k.padded() == tiles[t].padded, "tile key padding does not match the layer plan");
    if (k.padded()) {
      require(k.row_mask.size() == config.rows && k.col_mask.size() == config.data_cols(),
              "padding mask length mismatch");
    }
  }
}

// Flip every cell of the blocks whose key bit is set, in every group and
// both halves of a pair.
void apply_transform(std::vector<LevelMatrix>& slices, const TileKey& key,
                     const CrossbarConfig& config) {
  const std::uint16_t top = config.max_level();
  for (std::size_t b = 0; b < key.blocks; ++b) {
    for (std::size_t j = 0; j < key.cols; ++j) {
      if (!key.bit(b, j)) continue;
      for (auto& s : slices) {
        for (std::size_t i = b * config.block_rows; i < (b + 1) * config.block_rows; ++i) {
          s.at(i, j) = static_cast<std::uint16_t>(top - s.at(i, j));
        }
      }
    }
  }
}

}  // namespace

std::vector<LayerPlan> plans_of(std::span<const LayerSpec> layers, const std::vector<bool>& protect) {
  require(protect.empty() || protect.size() == layers.size(),
          "protection flags must match the layer count");
  std::vector<LayerPlan> plans;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    plans.push_back({layers[l].vmm_rows(), layers[l].vmm_cols(), protect.empty() || protect[l]});
  }
  return plans;
}

MappedLayer map_layer(const LayerSpec& layer, const CrossbarConfig& config, const LayerKeys& keys,
                      std::uint64_t pad_seed) {
  config.validate();
  layer.validate();
  require(layer.weight_bits <= config.weight_bits(),
          "layer weights have " + std::to_string(layer.weight_bits) +
              " bits but the crossbars hold p_m*G = " + std::to_string(config.weight_bits()));
  require(layer.weight.bits() == layer.weight_bits, "layer weight precision mismatch");

  const QuantTensor w = layer.vmm_matrix();
  const LayerPlan plan{w.rows(), w.cols(), keys.protect};
  const auto tiles = plan_tiles(plan, config);
  check_keys_fit(keys, tiles, config);

  MappedLayer out;
  out.geom = layer;
  out.protect = keys.protect;
  out.row_tiles = tiles.back().row_tile + 1;
  out.col_tiles = tiles.back().col_tile + 1;
  const bool biased = config.scheme == Scheme::kBiased;
  out.bias_offset = biased ? scheme1_bias_offset(config.weight_bits()) : 0;

  const auto g_count = static_cast<std::size_t>(config.groups);
  const std::size_t dc = config.data_cols();
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& g = tiles[t];
    const auto& key = keys.tiles[t];

    MappedTile mt;
    mt.geom = g;
    const auto row_pos = mask_positions(key.row_mask, g.rows);
    const auto col_pos = mask_positions(key.col_mask, g.cols);

    // Physical weight image of this PE; cells outside the real (or padded)
    // region are left unprogrammed.
    std::vector<std::int32_t> phys(config.rows * dc, 0);
    std::vector<std::uint8_t> used(config.rows * dc, 0);
    if (g.padded) {
      std::vector<std::int32_t> block(g.rows * g.cols);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) block[i * g.cols + j] = w.at(g.row0 + i, g.col0 + j);
      std::mt19937_64 rng(mix_seed(pad_seed, t));
      const auto padded = pad_matrix(QuantTensor({g.rows, g.cols}, std::move(block), w.bits(), true),
                                     config.rows, dc, rng, key.row_mask, key.col_mask);
      std::copy(padded.data().begin(), padded.data().end(), phys.begin());
      std::fill(used.begin(), used.end(), 1);
    } else {
      for (std::size_t i = 0; i < g.rows; ++i) {
        for (std::size_t j = 0; j < g.cols; ++j) {
          phys[row_pos[i] * dc + col_pos[j]] = w.at(g.row0 + i, g.col0 + j);
          used[row_pos[i] * dc + col_pos[j]] = 1;
        }
      }
    }

    std::vector<LevelMatrix> pos(g_count, LevelMatrix(config.rows, dc));
    std::vector<LevelMatrix> neg;
    if (!biased) neg.assign(g_count, LevelMatrix(config.rows, dc));
    for (std::size_t c = 0; c < phys.size(); ++c) {
      if (!used[c]) continue;
      const std::int64_t v = phys[c];
      if (biased) {
        const auto digits = slice_value(static_cast<std::uint32_t>(v + out.bias_offset),
                                        config.device_bits, config.groups);
        for (std::size_t s = 0; s < g_count; ++s) pos[s].cells[c] = digits[s];
      } else {
        // Canonical split: the magnitude goes to the side matching the sign.
        const auto p = slice_value(static_cast<std::uint32_t>(v > 0 ? v : 0), config.device_bits,
                                   config.groups);
        const auto n = slice_value(static_cast<std::uint32_t>(v < 0 ? -v : 0), config.device_bits,
                                   config.groups);
        for (std::size_t s = 0; s < g_count; ++s) {
          pos[s].cells[c] = p[s];
          neg[s].cells[c] = n[s];
        }
      }
    }
    apply_transform(pos, key, config);
    apply_transform(neg, key, config);
    mt.groups = program_tile(pos, neg, config);
    out.tiles.push_back(std::move(mt));
  }
  return out;
}

MappedModel map_model(std::span<const LayerSpec> layers, const CrossbarConfig& config,
                      const KeyStore& keys) {
  require(keys.layers.size() == layers.size(), "key store has " +
                                                   std::to_string(keys.layers.size()) +
                                                   " layers, model has " +
                                                   std::to_string(layers.size()));
  require(keys.config == config, "key store was generated for a different crossbar config");
  MappedModel mm;
  mm.config = config;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    mm.layers.push_back(map_layer(layers[l], config, keys.layers[l], mix_seed(keys.seed, 1000 + l)));
  }
  return mm;
}

QuantTensor demap_layer(const MappedLayer& layer, const CrossbarConfig& config,
                        const LayerKeys& keys) {
  const std::size_t m = layer.geom.vmm_rows();
  const std::size_t n = layer.geom.vmm_cols();
  const auto tiles = plan_tiles({m, n, layer.protect}, config);
  check_keys_fit(keys, tiles, config);
  require(layer.tiles.size() == tiles.size(), "mapped layer tile count mismatch");

  const bool biased = config.scheme == Scheme::kBiased;
  const std::uint16_t top = config.max_level();
  const std::size_t dc = config.data_cols();
  std::vector<std::int32_t> w(m * n, 0);
  std::vector<std::uint16_t> digits(static_cast<std::size_t>(config.groups));

  auto read_level = [&](const LevelMatrix& cells, std::size_t r, std::size_t c, bool flip) {
    const std::uint16_t v = cells.at(r, c);
    return flip ? static_cast<std::uint16_t>(top - v) : v;
  };

  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& g = tiles[t];
    const auto& key = keys.tiles[t];
    const auto& mt = layer.tiles[t];
    require(mt.groups.size() == static_cast<std::size_t>(config.groups),
            "mapped tile group count mismatch");
    const auto rpos = mask_positions(key.row_mask, g.rows);
    const auto cpos = mask_positions(key.col_mask, g.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
      const std::size_t pr = rpos[i];
      const std::size_t block = pr / config.block_rows;
      for (std::size_t j = 0; j < g.cols; ++j) {
        const std::size_t pc = cpos[j];
        require(pc < dc, "column mask points past the data columns");
        const bool flip = key.bit(block, pc);
        std::int64_t v = 0;
        for (std::size_t s = 0; s < digits.size(); ++s)
          digits[s] = read_level(mt.groups[s].pos(), pr, pc, flip);
        v = unslice_value(digits, config.device_bits);
        if (biased) {
          v -= layer.bias_offset;
        } else {
          for (std::size_t s = 0; s < digits.size(); ++s)
            digits[s] = read_level(mt.groups[s].neg(), pr, pc, flip);
          v -= unslice_value(digits, config.device_bits);
        }
        w[(g.row0 + i) * n + g.col0 + j] = static_cast<std::int32_t>(v);
      }
    }
  }

  int bits = layer.geom.weight_bits;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  while (bits < 17 && (*lo < range_min(bits, true) || *hi > range_max(bits, true))) ++bits;
  return QuantTensor(layer.geom.weight_shape, std::move(w), bits, true);
}

}  // namespace xbarsec
