#include "xbarsec/decoder.hpp"

#include <string>

#include "xbarsec/error.hpp"

namespace xbarsec {

Acc compute_bias(Acc sum_inputs, int device_bits) {
  require(sum_inputs >= 0, "compute_bias: sum of inputs must be non-negative");
  return (sum_inputs << device_bits) - sum_inputs;
}

Acc decode_scheme1(Acc observed, Acc bias, bool key_bit) {
  return key_bit ? bias - observed : observed;
}

Acc decode_scheme2(Acc observed, bool key_bit) { return key_bit ? -observed : observed; }

DecoderContext::DecoderContext(const CrossbarConfig& config)
    : scheme_(config.scheme), device_bits_(config.device_bits) {}

void DecoderContext::load_segment(Acc sum_inputs) {
  if (scheme_ != Scheme::kBiased) return;
  bias_ = compute_bias(sum_inputs, device_bits_);
  ++bias_cycles_;
}

Acc DecoderContext::decode(Acc observed, bool key_bit) const {
  return scheme_ == Scheme::kBiased ? decode_scheme1(observed, bias_, key_bit)
                                    : decode_scheme2(observed, key_bit);
}

std::vector<Acc> decode_block_pipeline(std::span<const Acc> segment_outputs, const TileKey& key,
                                       const CrossbarConfig& config, DecoderContext& ctx) {
  require(config.block_rows % config.wl_active == 0 && config.rows % config.block_rows == 0,
          "decode: segments of " + std::to_string(config.wl_active) +
              " rows do not tile blocks of " + std::to_string(config.block_rows));
  const std::size_t nseg = config.segments();
  const std::size_t cols = config.cols;
  const std::size_t dc = config.data_cols();
  require(segment_outputs.size() == nseg * cols, "decode: segment output size mismatch");
  require(key.blocks == config.blocks() && key.cols == dc, "decode: key shape mismatch");
  const bool biased = config.scheme == Scheme::kBiased;

  std::vector<Acc> y(dc, 0);
  const std::size_t per_block = config.segments_per_block();
  for (std::size_t s = 0; s < nseg; ++s) {
    const Acc* seg = segment_outputs.data() + s * cols;
    if (biased) ctx.load_segment(seg[cols - 1]);
    const std::size_t block = s / per_block;
    for (std::size_t j = 0; j < dc; ++j) y[j] += ctx.decode(seg[j], key.bit(block, j));
  }
  return y;
}

}  // namespace xbarsec
