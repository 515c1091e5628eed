#include "xbarsec/kernels.hpp"

#include <algorithm>

#include <omp.h>

#include "xbarsec/error.hpp"

namespace xbarsec::kernels {

std::size_t segment_count(std::size_t rows, std::size_t seg_rows) {
  return (rows + seg_rows - 1) / seg_rows;
}

namespace {

void check_args(CellView c, std::span<const std::int32_t> x, std::size_t seg_rows,
                std::span<Acc> out) {
  require(seg_rows > 0, "segment_vmm: segment height must be positive");
  require(x.size() == c.rows, "segment_vmm: input length != crossbar rows");
  require(out.size() == segment_count(c.rows, seg_rows) * c.cols,
          "segment_vmm: output buffer has wrong size");
}

// One segment; the inner column loop is contiguous so it vectorizes.
inline void one_segment(CellView c, std::span<const std::int32_t> x, std::size_t r0,
                        std::size_t r1, Acc* out) {
  std::fill(out, out + c.cols, Acc{0});
  for (std::size_t i = r0; i < r1; ++i) {
    const Acc xi = x[i];
    if (xi == 0) continue;
    const std::uint16_t* row = c.cells + i * c.cols;
    for (std::size_t j = 0; j < c.cols; ++j) out[j] += static_cast<Acc>(row[j]) * xi;
  }
}

}  // namespace

namespace serial {

void segment_vmm(CellView c, std::span<const std::int32_t> x, std::size_t seg_rows,
                 std::span<Acc> out) {
  check_args(c, x, seg_rows, out);
  const std::size_t nseg = segment_count(c.rows, seg_rows);
  for (std::size_t s = 0; s < nseg; ++s) {
    one_segment(c, x, s * seg_rows, std::min(c.rows, (s + 1) * seg_rows), out.data() + s * c.cols);
  }
}

}  // namespace serial

namespace omp {

void segment_vmm(CellView c, std::span<const std::int32_t> x, std::size_t seg_rows,
                 std::span<Acc> out) {
  check_args(c, x, seg_rows, out);
  const auto nseg = static_cast<std::ptrdiff_t>(segment_count(c.rows, seg_rows));
  // Segments write disjoint slices of out.
#pragma omp parallel for schedule(static) if (nseg > 1 && !omp_in_parallel())
  for (std::ptrdiff_t s = 0; s < nseg; ++s) {
    const auto su = static_cast<std::size_t>(s);
    one_segment(c, x, su * seg_rows, std::min(c.rows, (su + 1) * seg_rows),
                out.data() + su * c.cols);
  }
}

}  // namespace omp

}  // namespace xbarsec::kernels
