#include <doctest.h>

#include "support.hpp"
#include "xbarsec/crossbar.hpp"
#include "xbarsec/error.hpp"
#include "xbarsec/kernels.hpp"

using namespace xbarsec;
using namespace xbarsec::test;

namespace {

LevelMatrix random_levels(Rng& rng, std::size_t r, std::size_t c, int max_level) {
  LevelMatrix m(r, c);
  for (auto& v : m.cells) v = static_cast<std::uint16_t>(uniform_int(rng, 0, max_level));
  return m;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("serial and OpenMP segment VMM agree with a naive triple loop") {
  Rng rng(21);
  for (int trial = 0; trial < 80; ++trial) {
    const auto rows = static_cast<std::size_t>(uniform_int(rng, 1, 300));
    const auto cols = static_cast<std::size_t>(uniform_int(rng, 1, 70));
    const auto seg = static_cast<std::size_t>(uniform_int(rng, 1, 40));
    const auto cells = random_levels(rng, rows, cols, 15);
    const auto x = random_input(rng, rows, 8);
    const std::size_t nseg = (rows + seg - 1) / seg;
    std::vector<Acc> naive(nseg * cols, 0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) naive[(i / seg) * cols + j] += Acc{cells.at(i, j)} * x[i];

    std::vector<Acc> a(naive.size(), -1), b(naive.size(), -1);
    kernels::CellView v{cells.cells.data(), rows, cols};
    kernels::serial::segment_vmm(v, x, seg, a);
    kernels::omp::segment_vmm(v, x, seg, b);
    CHECK(a == naive);
    CHECK(b == naive);
  }
}

TEST_CASE("segment VMM argument checks") {
  const LevelMatrix m(4, 2);
  const std::vector<std::int32_t> x(4, 1);
  std::vector<Acc> out(4);
  kernels::CellView v{m.cells.data(), 4, 2};
  CHECK_THROWS_AS(kernels::serial::segment_vmm(v, x, 0, out), ValidationError);
  CHECK_THROWS_AS(kernels::serial::segment_vmm(v, x, 3, std::span<Acc>(out.data(), 3)), ValidationError);
  CHECK_NOTHROW(kernels::serial::segment_vmm(v, x, 2, out));
}

}

TEST_SUITE("crossbar") {

TEST_CASE("bit slicing is positional decomposition, most significant digit first") {
  for (int pm = 1; pm <= 4; ++pm) {
    for (int g = 1; pm * g <= 12; ++g) {
      const std::uint32_t top = 1u << (pm * g);
      for (std::uint32_t v = 0; v < top; v += 1 + top / 300) {
        const auto d = slice_value(v, pm, g);
        REQUIRE(d.size() == static_cast<std::size_t>(g));
        std::uint64_t rebuilt = 0;
        for (int i = 0; i < g; ++i) {
          CHECK(d[static_cast<std::size_t>(i)] < (1u << pm));
          rebuilt += std::uint64_t{d[static_cast<std::size_t>(i)]} << (pm * (g - 1 - i));
        }
        CHECK(rebuilt == v);
        CHECK(unslice_value(d, pm) == v);
      }
    }
  }
  CHECK(slice_value(6, 1, 3) == std::vector<std::uint16_t>{1, 1, 0});
  CHECK_THROWS_AS(slice_value(8, 1, 3), ValidationError);
}

TEST_CASE("shift_add_combine weights group g by 2^(p_m (G-1-g))") {
  CrossbarConfig c;
  c.device_bits = 2;
  c.groups = 3;
  const std::vector<Acc> parts{1, -2, 5};
  CHECK(shift_add_combine(parts, c) == 16 * 1 + 4 * -2 + 5);
  const std::vector<Acc> wrong{1, 2};
  CHECK_THROWS_AS(shift_add_combine(wrong, c), ValidationError);
}

TEST_CASE("program_tile appends the all-ones sum column") {
  CrossbarConfig c;
  c.rows = 8;
  c.cols = 5;
  c.wl_active = 2;
  c.block_rows = 4;
  c.groups = 2;
  c.device_bits = 2;
  Rng rng(5);
  std::vector<LevelMatrix> pos{random_levels(rng, 8, 4, 3), random_levels(rng, 8, 4, 3)};
  const auto tiles = program_tile(pos, {}, c);
  REQUIRE(tiles.size() == 2);
  for (std::size_t g = 0; g < 2; ++g) {
    CHECK(tiles[g].sum_col_index() == std::optional<std::size_t>(4));
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(tiles[g].pos().at(i, 4) == 1);
      for (std::size_t j = 0; j < 4; ++j) CHECK(tiles[g].pos().at(i, j) == pos[g].at(i, j));
    }
  }
  c.scheme = Scheme::kDifferential;
  CHECK_THROWS_AS(program_tile(pos, {}, c), ValidationError);
  const auto pair = program_tile(pos, pos, c);
  CHECK(pair[0].is_pair());
  CHECK(pair[0].neg().at(3, 4) == 0);
}

TEST_CASE("tile construction rejects out-of-range levels and a broken sum column") {
  CrossbarConfig c;
  c.rows = 4;
  c.cols = 3;
  c.wl_active = 2;
  c.block_rows = 2;
  c.groups = 2;
  LevelMatrix m(4, 3, 1);
  CHECK_NOTHROW(CrossbarTile(m, std::nullopt, c));
  m.at(0, 0) = 2;
  CHECK_THROWS_AS(CrossbarTile(m, std::nullopt, c), ValidationError);
  m.at(0, 0) = 0;
  m.at(2, 2) = 0;
  CHECK_THROWS_AS(CrossbarTile(m, std::nullopt, c), ValidationError);
}

TEST_CASE("segment outputs sum to the full VMM; pairs subtract") {
  Rng rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const auto scheme = uniform_int(rng, 0, 1) ? Scheme::kBiased : Scheme::kDifferential;
    const auto c = random_config(rng, scheme);
    std::vector<LevelMatrix> pos, neg;
    for (int g = 0; g < c.groups; ++g) {
      pos.push_back(random_levels(rng, c.rows, c.data_cols(), c.max_level()));
      if (scheme == Scheme::kDifferential) neg.push_back(random_levels(rng, c.rows, c.data_cols(), c.max_level()));
    }
    const auto tiles = program_tile(pos, neg, c);
    const auto x = random_input(rng, c.rows, c.input_bits);
    const auto& t = tiles.front();
    const auto segs = xbar_vmm_segments(t, x, kernels::Exec::kSerial);
    CHECK(segs == xbar_vmm_segments(t, x, kernels::Exec::kParallel));
    const std::size_t nseg = c.segments();
    for (std::size_t j = 0; j < c.cols; ++j) {
      Acc total = 0, expect = 0;
      for (std::size_t s = 0; s < nseg; ++s) total += segs[s * c.cols + j];
      for (std::size_t i = 0; i < c.rows; ++i) {
        Acc w = t.pos().at(i, j);
        if (t.is_pair()) w -= t.neg().at(i, j);
        expect += w * x[i];
      }
      CHECK(total == expect);
    }
    // One explicit segment through the single-segment entry point.
    const std::size_t s = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(nseg) - 1));
    const auto one = xbar_vmm_segment(t, x, s * c.wl_active, (s + 1) * c.wl_active);
    CHECK(std::vector<Acc>(segs.begin() + static_cast<std::ptrdiff_t>(s * c.cols),
                           segs.begin() + static_cast<std::ptrdiff_t>((s + 1) * c.cols)) == one);
  }
}

TEST_CASE("xbar_vmm_segment refuses more rows than active word lines") {
  CrossbarConfig c;
  c.rows = 8;
  c.cols = 3;
  c.wl_active = 2;
  c.block_rows = 4;
  c.groups = 2;
  const CrossbarTile t(LevelMatrix(8, 3, 1), std::nullopt, c);
  const std::vector<std::int32_t> x(8, 1);
  CHECK_THROWS_AS(xbar_vmm_segment(t, x, 0, 3), ValidationError);
  CHECK(xbar_vmm_segment(t, x, 2, 4) == std::vector<Acc>{2, 2, 2});
}

TEST_CASE("sum_of_inputs") {
  const std::vector<std::int32_t> x{3, 0, 7, 255};
  CHECK(sum_of_inputs(x) == 265);
  CHECK(sum_of_inputs({}) == 0);
}

TEST_CASE("config validation") {
  auto c = CrossbarConfig::evaluation_default(Scheme::kBiased);
  CHECK_NOTHROW(c.validate());
  CHECK(c.weight_bits() == 8);
  CHECK(c.blocks() == 8);
  CHECK(c.data_cols() == 255);
  const auto c2 = CrossbarConfig::evaluation_default(Scheme::kDifferential);
  CHECK(c2.data_cols() == 256);
  c.block_rows = 24;  // not a multiple of wl_active = 16
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.block_rows = 48;  // does not divide 256
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = CrossbarConfig::evaluation_default(Scheme::kBiased);
  c.sum_column = false;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = CrossbarConfig::evaluation_default(Scheme::kBiased);
  c.groups = 17;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = CrossbarConfig::evaluation_default(Scheme::kBiased);
  c.rows = 2048;
  c.block_rows = 32;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

}
