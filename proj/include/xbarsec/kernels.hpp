#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "xbarsec/tensor.hpp"

// Crossbar VMM kernels. The serial versions are the reference the OpenMP
// versions are tested and benchmarked against; both must agree bit for bit.
namespace xbarsec::kernels {

enum class Exec { kSerial, kParallel };

// Row-major (rows x cols) conductance levels.
struct CellView {
  const std::uint16_t* cells;
  std::size_t rows;
  std::size_t cols;
};

// out[s * cols + j] = sum over rows i of segment s of cells(i, j) * x[i],
// segments being consecutive runs of seg_rows rows (the last may be short).
// out must hold ceil(rows / seg_rows) * cols values.
namespace serial {
void segment_vmm(CellView c, std::span<const std::int32_t> x, std::size_t seg_rows,
                 std::span<Acc> out);
}
namespace omp {
void segment_vmm(CellView c, std::span<const std::int32_t> x, std::size_t seg_rows,
                 std::span<Acc> out);
}

inline void segment_vmm(Exec exec, CellView c, std::span<const std::int32_t> x,
                        std::size_t seg_rows, std::span<Acc> out) {
  if (exec == Exec::kParallel)
    omp::segment_vmm(c, x, seg_rows, out);
  else
    serial::segment_vmm(c, x, seg_rows, out);
}

std::size_t segment_count(std::size_t rows, std::size_t seg_rows);

}  // namespace xbarsec::kernels
