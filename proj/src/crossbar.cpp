#include "xbarsec/crossbar.hpp"

#include <algorithm>
#include <string>

#include "xbarsec/error.hpp"

namespace xbarsec {

void CrossbarConfig::validate() const {
  require(rows > 0 && cols > 0, "crossbar must have at least one row and one column");
  require(rows <= 1024, "crossbar rows must be <= 1024, got " + std::to_string(rows));
  require(device_bits >= 1 && device_bits <= 16,
          "device precision p_m must be in [1, 16], got " + std::to_string(device_bits));
  require(groups >= 1, "crossbar groups G must be >= 1");
  require(weight_bits() >= 2 && weight_bits() <= 16,
          "weight precision p_m*G must be in [2, 16], got " + std::to_string(weight_bits()));
  require(input_bits >= 1 && input_bits <= 16,
          "input precision must be in [1, 16], got " + std::to_string(input_bits));
  require(wl_active > 0, "active word lines must be positive");
  require(block_rows > 0 && block_rows % wl_active == 0,
          "block height x=" + std::to_string(block_rows) +
              " must be a positive multiple of the active word lines (" +
              std::to_string(wl_active) + ")");
  require(rows % block_rows == 0, "block height x=" + std::to_string(block_rows) +
                                      " must divide the crossbar rows M=" + std::to_string(rows));
  require(scheme == Scheme::kBiased || scheme == Scheme::kDifferential, "unknown mapping scheme");
  if (scheme == Scheme::kBiased) {
    require(sum_column, "scheme 1 needs the sum-of-inputs column");
  }
  require(data_cols() >= 1, "crossbar has no data columns left");
  require(adc_per_group >= 1, "adc_per_group must be >= 1");
}

CrossbarConfig CrossbarConfig::evaluation_default(Scheme scheme) {
  CrossbarConfig c;
  c.scheme = scheme;
  // 256x256 for scheme 1; 256x257 for scheme 2, the extra column holding
  // the sum of inputs.
  c.cols = scheme == Scheme::kBiased ? 256 : 257;
  c.sum_column = true;
  return c;
}

namespace {

void check_levels(const LevelMatrix& m, const CrossbarConfig& config, const char* what) {
  require(m.rows == config.rows && m.cols == config.cols,
          std::string(what) + " has shape " + std::to_string(m.rows) + "x" +
              std::to_string(m.cols) + ", expected " + std::to_string(config.rows) + "x" +
              std::to_string(config.cols));
  require(m.cells.size() == m.rows * m.cols, std::string(what) + " cell count mismatch");
  const auto hi = config.max_level();
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    if (m.cells[i] > hi) {
      throw ValidationError(std::string(what) + " cell (" + std::to_string(i / m.cols) + ", " +
                            std::to_string(i % m.cols) + ") level " +
                            std::to_string(m.cells[i]) + " exceeds device range [0, " +
                            std::to_string(hi) + "]");
    }
  }
}

}  // namespace

CrossbarTile::CrossbarTile(LevelMatrix pos, std::optional<LevelMatrix> neg,
                           const CrossbarConfig& config)
    : pos_(std::move(pos)), neg_(std::move(neg)), wl_active_(config.wl_active) {
  check_levels(pos_, config, "positive crossbar");
  if (config.scheme == Scheme::kDifferential) {
    require(neg_.has_value(), "scheme 2 tile needs a negative crossbar");
    check_levels(*neg_, config, "negative crossbar");
  } else {
    require(!neg_.has_value(), "scheme 1 tile has a single crossbar");
  }
  if (config.sum_column) {
    const std::size_t j = config.cols - 1;
    for (std::size_t i = 0; i < rows(); ++i) {
      require(pos_.at(i, j) == 1, "sum-of-inputs column must be all ones");
      if (neg_) require(neg_->at(i, j) == 0, "negative crossbar sum column must be zero");
    }
    sum_col_ = j;
  }
}

std::vector<std::uint16_t> slice_value(std::uint32_t value, int device_bits, int groups) {
  require(device_bits * groups <= 32, "slice_value: too many bits");
  require(device_bits * groups == 32 || value < (std::uint64_t{1} << (device_bits * groups)),
          "slice_value: value does not fit in p_m*G bits");
  std::vector<std::uint16_t> digits(static_cast<std::size_t>(groups));
  const std::uint32_t mask = (1u << device_bits) - 1;
  for (int g = groups - 1; g >= 0; --g) {
    digits[static_cast<std::size_t>(g)] = static_cast<std::uint16_t>(value & mask);
    value >>= device_bits;
  }
  return digits;
}

std::uint32_t unslice_value(std::span<const std::uint16_t> digits, int device_bits) {
  std::uint32_t v = 0;
  for (auto d : digits) v = (v << device_bits) | d;
  return v;
}

std::vector<CrossbarTile> program_tile(const std::vector<LevelMatrix>& pos_slices,
                                       const std::vector<LevelMatrix>& neg_slices,
                                       const CrossbarConfig& config) {
  config.validate();
  const auto g_count = static_cast<std::size_t>(config.groups);
  require(pos_slices.size() == g_count, "program_tile: expected " + std::to_string(g_count) +
                                            " slices, got " + std::to_string(pos_slices.size()));
  const bool pair = config.scheme == Scheme::kDifferential;
  require(pair ? neg_slices.size() == g_count : neg_slices.empty(),
          "program_tile: negative slices must match the scheme");

  auto place = [&](const LevelMatrix& slice, bool is_neg) {
    require(slice.rows == config.rows && slice.cols == config.data_cols(),
            "program_tile: slice must be " + std::to_string(config.rows) + "x" +
                std::to_string(config.data_cols()));
    LevelMatrix m(config.rows, config.cols, 0);
    for (std::size_t i = 0; i < config.rows; ++i) {
      std::copy_n(slice.cells.begin() + static_cast<std::ptrdiff_t>(i * slice.cols), slice.cols,
                  m.cells.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
      if (config.sum_column) m.at(i, config.cols - 1) = is_neg ? 0 : 1;
    }
    return m;
  };

  std::vector<CrossbarTile> tiles;
  tiles.reserve(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    std::optional<LevelMatrix> neg;
    if (pair) neg = place(neg_slices[g], true);
    tiles.emplace_back(place(pos_slices[g], false), std::move(neg), config);
  }
  return tiles;
}

namespace {

kernels::CellView view(const LevelMatrix& m) { return {m.cells.data(), m.rows, m.cols}; }

}  // namespace

std::vector<Acc> xbar_vmm_segment(const CrossbarTile& tile, std::span<const std::int32_t> x,
                                  std::size_t row_begin, std::size_t row_end) {
  require(x.size() == tile.rows(), "xbar_vmm_segment: input length != crossbar rows");
  require(row_begin <= row_end && row_end <= tile.rows(),
          "xbar_vmm_segment: row range exceeds crossbar rows");
  require(row_end - row_begin <= tile.wl_active(),
          "xbar_vmm_segment: more rows than active word lines");
  std::vector<Acc> out(tile.cols(), 0);
  if (row_begin == row_end) return out;

  const std::size_t n = row_end - row_begin;
  auto sub = [&](const LevelMatrix& m) {
    return kernels::CellView{m.cells.data() + row_begin * m.cols, n, m.cols};
  };
  kernels::serial::segment_vmm(sub(tile.pos()), x.subspan(row_begin, n), n, out);
  if (tile.is_pair()) {
    std::vector<Acc> neg(tile.cols(), 0);
    kernels::serial::segment_vmm(sub(tile.neg()), x.subspan(row_begin, n), n, neg);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] -= neg[j];
  }
  return out;
}

std::vector<Acc> xbar_vmm_segments(const CrossbarTile& tile, std::span<const std::int32_t> x,
                                   kernels::Exec exec) {
  const std::size_t nseg = kernels::segment_count(tile.rows(), tile.wl_active());
  std::vector<Acc> out(nseg * tile.cols(), 0);
  kernels::segment_vmm(exec, view(tile.pos()), x, tile.wl_active(), out);
  if (tile.is_pair()) {
    // Negative-polarity inputs: the pair's currents subtract on the bit line.
    std::vector<Acc> neg(out.size(), 0);
    kernels::segment_vmm(exec, view(tile.neg()), x, tile.wl_active(), neg);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= neg[i];
  }
  return out;
}

Acc shift_add_combine(std::span<const Acc> partials, const CrossbarConfig& config) {
  require(partials.size() == static_cast<std::size_t>(config.groups),
          "shift_add_combine: expected " + std::to_string(config.groups) + " partials, got " +
              std::to_string(partials.size()));
  Acc y = 0;
  for (Acc p : partials) y = y * (Acc{1} << config.device_bits) + p;
  return y;
}

Acc sum_of_inputs(std::span<const std::int32_t> x_seg) {
  if (x_seg.empty()) return 0;
  const std::vector<std::uint16_t> ones(x_seg.size(), 1);
  Acc out = 0;
  kernels::serial::segment_vmm({ones.data(), x_seg.size(), 1}, x_seg, x_seg.size(), {&out, 1});
  return out;
}

}  // namespace xbarsec
