#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xbarsec/crossbar.hpp"
#include "xbarsec/secure_map.hpp"
#include "xbarsec/tensor.hpp"

namespace xbarsec {

// (2^p_m - 1) * sum, formed as (sum << p_m) - sum the way the PE's
// Shift&Add and the decoder's subtractor produce it.
Acc compute_bias(Acc sum_inputs, int device_bits);

// Scheme 1 selector: key set -> bias - observed, else observed.
Acc decode_scheme1(Acc observed, Acc bias, bool key_bit);

// Scheme 2 selector: key set -> -observed, else observed.
Acc decode_scheme2(Acc observed, bool key_bit);

// Per-segment decoder state. The bias is recomputed once per input segment
// from that segment's sum of inputs.
class DecoderContext {
 public:
  explicit DecoderContext(const CrossbarConfig& config);

  void load_segment(Acc sum_inputs);
  Acc bias() const { return bias_; }
  Acc decode(Acc observed, bool key_bit) const;

  // Bias computations performed; each costs the decoder one cycle.
  std::size_t bias_cycles() const { return bias_cycles_; }

 private:
  Scheme scheme_;
  int device_bits_;
  Acc bias_ = 0;
  std::size_t bias_cycles_ = 0;
};

// Decodes the per-segment outputs of one crossbar group and accumulates
// them per data column. `segment_outputs` is xbar_vmm_segments() output
// (segments x config.cols); for scheme 1 the sum-of-inputs column of each
// segment feeds the bias. Every segment lies inside one key block, and the
// block's key bit selects the decode before blocks are summed.
std::vector<Acc> decode_block_pipeline(std::span<const Acc> segment_outputs,
                                       const TileKey& key, const CrossbarConfig& config,
                                       DecoderContext& ctx);

}  // namespace xbarsec
