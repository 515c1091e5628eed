#pragma once

// Generators and oracles shared by the test binaries.

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "xbarsec/crossbar.hpp"
#include "xbarsec/nn.hpp"
#include "xbarsec/secure_map.hpp"
#include "xbarsec/tensor.hpp"

namespace xbarsec::test {

inline std::filesystem::path source_dir() { return XBARSEC_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path fixture_dir() { return source_dir() / "tests" / "fixtures"; }

using Rng = std::mt19937_64;

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& options) {
  return options[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(options.size()) - 1))];
}

inline QuantTensor random_weights(Rng& rng, Shape shape, int bits) {
  std::vector<std::int32_t> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<std::int32_t>(uniform_int(rng, range_min(bits, true), range_max(bits, true)));
  return QuantTensor(std::move(shape), std::move(v), bits, true);
}

inline std::vector<std::int32_t> random_input(Rng& rng, std::size_t n, int bits) {
  std::vector<std::int32_t> v(n);
  for (auto& x : v) x = static_cast<std::int32_t>(uniform_int(rng, 0, range_max(bits, false)));
  return v;
}

// A valid crossbar configuration of modest size. Weight precision p_m*G is
// at least `min_weight_bits`.
inline CrossbarConfig random_config(Rng& rng, Scheme scheme, int min_weight_bits = 2) {
  CrossbarConfig c;
  c.scheme = scheme;
  c.rows = static_cast<std::size_t>(pick(rng, std::vector<int>{16, 32, 64, 128}));
  c.cols = static_cast<std::size_t>(uniform_int(rng, 4, 64));
  c.wl_active = static_cast<std::size_t>(pick(rng, std::vector<int>{1, 2, 4, 8, 16}));
  if (c.wl_active > c.rows) c.wl_active = c.rows;
  std::vector<std::size_t> xs;
  for (std::size_t x = c.wl_active; x <= c.rows; x += c.wl_active)
    if (c.rows % x == 0) xs.push_back(x);
  c.block_rows = pick(rng, xs);
  do {
    c.device_bits = static_cast<int>(pick(rng, std::vector<int>{1, 2, 3, 4}));
    c.groups = static_cast<int>(uniform_int(rng, 1, 8));
  } while (c.weight_bits() < std::max(2, min_weight_bits) || c.weight_bits() > 16);
  c.sum_column = scheme == Scheme::kBiased ? true : uniform_int(rng, 0, 1) == 1;
  c.input_bits = static_cast<int>(uniform_int(rng, 1, 8));
  c.pad_small = uniform_int(rng, 0, 3) != 0;
  c.validate();
  return c;
}

inline Activation random_activation(Rng& rng) {
  return Activation{Activation::Kind::kRelu, static_cast<int>(uniform_int(rng, 0, 12))};
}

// Random FC/Conv chain ending in `classes` raw scores.
inline NetworkModel random_model(Rng& rng, int weight_bits, int input_bits, std::size_t max_dim) {
  NetworkModel m;
  m.input_bits = input_bits;
  const bool conv_first = uniform_int(rng, 0, 1) == 1;
  Shape cur;
  if (conv_first) {
    const auto h = static_cast<std::size_t>(uniform_int(rng, 3, 16));
    const auto w = static_cast<std::size_t>(uniform_int(rng, 3, 16));
    const auto c = static_cast<std::size_t>(uniform_int(rng, 1, 8));
    const auto k = static_cast<std::size_t>(pick(rng, std::vector<int>{1, 2, 3}));
    const auto oc = static_cast<std::size_t>(uniform_int(rng, 1, 8));
    const auto stride = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const auto pad = static_cast<std::size_t>(uniform_int(rng, 0, 1));
    m.input_shape = {h, w, c};
    m.layers.push_back(make_conv({h, w, c}, random_weights(rng, {k, k, c, oc}, weight_bits), stride, pad,
                                 random_activation(rng)));
    cur = m.layers.back().out_dims;
  } else {
    cur = {static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(max_dim)))};
    m.input_shape = cur;
  }
  const auto hidden = uniform_int(rng, 0, 2);
  for (std::int64_t h = 0; h < hidden; ++h) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(max_dim)));
    m.layers.push_back(make_fc(random_weights(rng, {shape_numel(cur), n}, weight_bits), random_activation(rng)));
    cur = {n};
  }
  const auto classes = static_cast<std::size_t>(uniform_int(rng, 2, 12));
  m.layers.push_back(make_fc(random_weights(rng, {shape_numel(cur), classes}, weight_bits),
                             Activation{Activation::Kind::kNone, 0}));
  m.num_classes = classes;
  m.validate();
  return m;
}

// Direct convolution, HWC layout, zero padding: the textbook six-loop form.
inline std::vector<Acc> direct_conv(const std::vector<std::int32_t>& in, const Shape& in_dims,
                                    const QuantTensor& w, std::size_t stride, std::size_t pad) {
  const std::size_t H = in_dims[0], W = in_dims[1], C = in_dims[2];
  const std::size_t KH = w.shape()[0], KW = w.shape()[1], OC = w.shape()[3];
  const std::size_t OH = (H + 2 * pad - KH) / stride + 1, OW = (W + 2 * pad - KW) / stride + 1;
  std::vector<Acc> out(OH * OW * OC, 0);
  for (std::size_t oy = 0; oy < OH; ++oy)
    for (std::size_t ox = 0; ox < OW; ++ox)
      for (std::size_t o = 0; o < OC; ++o) {
        Acc s = 0;
        for (std::size_t ky = 0; ky < KH; ++ky)
          for (std::size_t kx = 0; kx < KW; ++kx)
            for (std::size_t c = 0; c < C; ++c) {
              const auto iy = static_cast<std::int64_t>(oy * stride + ky) - static_cast<std::int64_t>(pad);
              const auto ix = static_cast<std::int64_t>(ox * stride + kx) - static_cast<std::int64_t>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::int64_t>(H) || ix >= static_cast<std::int64_t>(W)) continue;
              s += Acc{in[(static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * C + c]} *
                   w[((ky * KW + kx) * C + c) * OC + o];
            }
        out[(oy * OW + ox) * OC + o] = s;
      }
  return out;
}

}  // namespace xbarsec::test
