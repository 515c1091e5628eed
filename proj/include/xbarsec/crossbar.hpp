#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xbarsec/kernels.hpp"
#include "xbarsec/tensor.hpp"

namespace xbarsec {

// Scheme 1 biases every weight non-negative and keeps one crossbar per
// group; scheme 2 stores signed weights as the difference of a
// positive/negative crossbar pair.
enum class Scheme : int { kBiased = 1, kDifferential = 2 };

struct CrossbarConfig {
  std::size_t rows = 256;       // M, word lines
  std::size_t cols = 256;       // N, bit lines (including the sum column if any)
  int device_bits = 1;          // p_m
  int groups = 8;               // G, crossbar groups per PE
  std::size_t wl_active = 16;   // word lines driven per ADC sample
  std::size_t block_rows = 32;  // x, rows sharing one column key bit
  int adc_per_group = 16;       // bookkeeping only, ADCs are ideal
  Scheme scheme = Scheme::kBiased;
  bool sum_column = true;       // last column is an all-ones sum-of-inputs column
  int input_bits = 8;           // p_x, activations are unsigned
  bool pad_small = true;        // pad partially filled tiles of protected layers

  int weight_bits() const { return device_bits * groups; }
  std::size_t blocks() const { return rows / block_rows; }  // k
  std::size_t data_cols() const { return cols - (sum_column ? 1 : 0); }
  std::size_t segments() const { return rows / wl_active; }
  std::size_t segments_per_block() const { return block_rows / wl_active; }
  std::uint16_t max_level() const {
    return static_cast<std::uint16_t>((1u << device_bits) - 1);
  }

  // Throws ValidationError describing the first violated invariant.
  void validate() const;

  static CrossbarConfig evaluation_default(Scheme scheme);

  friend bool operator==(const CrossbarConfig&, const CrossbarConfig&) = default;
};

// Row-major (rows x cols) matrix of device conductance levels.
struct LevelMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint16_t> cells;

  LevelMatrix() = default;
  LevelMatrix(std::size_t r, std::size_t c, std::uint16_t fill = 0)
      : rows(r), cols(c), cells(r * c, fill) {}
  std::uint16_t& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
  std::uint16_t at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
  friend bool operator==(const LevelMatrix&, const LevelMatrix&) = default;
};

// One crossbar group as programmed: a single crossbar (scheme 1) or a
// positive/negative pair (scheme 2), each config.rows x config.cols.
class CrossbarTile {
 public:
  CrossbarTile(LevelMatrix pos, std::optional<LevelMatrix> neg, const CrossbarConfig& config);

  std::size_t rows() const { return pos_.rows; }
  std::size_t cols() const { return pos_.cols; }
  bool is_pair() const { return neg_.has_value(); }
  const LevelMatrix& pos() const { return pos_; }
  const LevelMatrix& neg() const { return *neg_; }
  std::optional<std::size_t> sum_col_index() const { return sum_col_; }
  std::size_t wl_active() const { return wl_active_; }

  friend bool operator==(const CrossbarTile&, const CrossbarTile&) = default;

 private:
  LevelMatrix pos_;
  std::optional<LevelMatrix> neg_;
  std::optional<std::size_t> sum_col_;
  std::size_t wl_active_;
};

// Digits of value in radix 2^device_bits, most significant first.
std::vector<std::uint16_t> slice_value(std::uint32_t value, int device_bits, int groups);

// Inverse of slice_value, equal to shift_add_combine over constant digits.
std::uint32_t unslice_value(std::span<const std::uint16_t> digits, int device_bits);

// Programs the G data slices (each config.rows x config.data_cols) onto G
// crossbar groups; slice g goes to group g, and with config.sum_column the
// all-ones column is appended as the last bit line. neg_slices is required
// for scheme 2 and must be empty for scheme 1.
std::vector<CrossbarTile> program_tile(const std::vector<LevelMatrix>& pos_slices,
                                       const std::vector<LevelMatrix>& neg_slices,
                                       const CrossbarConfig& config);

// Column outputs of one activated row range [row_begin, row_end) of a tile.
// x is the full physical input vector (length tile.rows()). Pairs return
// pos.x - neg.x per column.
std::vector<Acc> xbar_vmm_segment(const CrossbarTile& tile, std::span<const std::int32_t> x,
                                  std::size_t row_begin, std::size_t row_end);

// Every segment of the tile at once: result[s * cols + j].
std::vector<Acc> xbar_vmm_segments(const CrossbarTile& tile, std::span<const std::int32_t> x,
                                   kernels::Exec exec = kernels::Exec::kSerial);

// sum_g (2^p_m)^(G-1-g) * partials[g]
Acc shift_add_combine(std::span<const Acc> partials, const CrossbarConfig& config);

// Sum of the segment inputs computed as a VMM against an all-ones column.
Acc sum_of_inputs(std::span<const std::int32_t> x_seg);

}  // namespace xbarsec
