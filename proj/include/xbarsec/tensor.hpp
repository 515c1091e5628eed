#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xbarsec {

// Accumulator type for every post-quantization sum. With rows <= 1024 and
// 16-bit operands the largest dot product stays below 2^42.
using Acc = std::int64_t;

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

// Integer tensor with a declared precision. Every element is checked
// against [-2^(bits-1), 2^(bits-1)-1] (signed) or [0, 2^bits-1] (unsigned).
class QuantTensor {
 public:
  QuantTensor() = default;
  QuantTensor(Shape shape, std::vector<std::int32_t> data, int bits, bool is_signed,
              double scale = 1.0);

  const Shape& shape() const { return shape_; }
  std::span<const std::int32_t> data() const { return data_; }
  int bits() const { return bits_; }
  bool is_signed() const { return signed_; }
  double scale() const { return scale_; }

  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only
  std::int32_t at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  std::int32_t operator[](std::size_t i) const { return data_[i]; }

  std::int32_t min_value() const;
  std::int32_t max_value() const;

  QuantTensor reshaped(Shape shape) const;

  friend bool operator==(const QuantTensor& a, const QuantTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_ && a.bits_ == b.bits_ &&
           a.signed_ == b.signed_;
  }

 private:
  Shape shape_;
  std::vector<std::int32_t> data_;
  int bits_ = 8;
  bool signed_ = true;
  double scale_ = 1.0;
};

std::int64_t range_min(int bits, bool is_signed);
std::int64_t range_max(int bits, bool is_signed);

// Symmetric linear quantization, round half away from zero, saturating.
// scale = max|v| / range_max; an all-zero input gets scale 1.
QuantTensor quantize(std::span<const double> values, int bits, bool is_signed);
QuantTensor quantize(std::span<const double> values, Shape shape, int bits, bool is_signed);
std::vector<double> dequantize(const QuantTensor& t);

// y_j = sum_i w(i, j) * x_i, exact. Ground truth for every crossbar path.
std::vector<Acc> matmul_oracle(std::span<const std::int32_t> x, const QuantTensor& w);

enum class LayerKind { kFC, kConv };

// Post-VMM activation: optional ReLU, then an arithmetic right shift and a
// clamp to the unsigned input range of the next layer. The last layer of a
// network usually has kind kNone and keeps raw scores.
struct Activation {
  enum class Kind { kNone, kRelu } kind = Kind::kRelu;
  int shift = 0;
  friend bool operator==(const Activation&, const Activation&) = default;
};

// Everything about a layer except its weight values. This is the part of a
// model the adversary is assumed to know.
//
// FC: in_dims {m}, out_dims {n}, weight (m, n).
// Conv: in_dims {H, W, C}, out_dims {OH, OW, OC}, weight (KH, KW, C, OC),
// activations in HWC order, zero padding.
struct LayerGeometry {
  LayerKind kind = LayerKind::kFC;
  Shape in_dims;
  Shape out_dims;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Shape weight_shape;
  int weight_bits = 8;
  Activation activation;

  // Rows of the VMM matrix (m) and its columns (n).
  std::size_t vmm_rows() const;
  std::size_t vmm_cols() const;
  // Number of VMM input vectors one layer evaluation needs.
  std::size_t vmm_count() const;

  void validate() const;
  friend bool operator==(const LayerGeometry&, const LayerGeometry&) = default;
};

struct LayerSpec : LayerGeometry {
  QuantTensor weight;

  // Weight as the 2-D (m, n) matrix the crossbars hold.
  QuantTensor vmm_matrix() const;
  void validate() const;
};

LayerSpec make_fc(QuantTensor weight, Activation act = {});
LayerSpec make_conv(Shape in_dims, QuantTensor weight, std::size_t stride, std::size_t padding,
                    Activation act = {});
LayerSpec with_weight(const LayerGeometry& geom, QuantTensor weight);

// Applies the activation to a VMM output, producing the next layer input.
std::vector<std::int32_t> apply_activation(std::span<const Acc> y, const Activation& act,
                                           int out_bits);

// Patch matrix (OH*OW, KH*KW*C); row p holds the receptive field of output
// pixel p in (ky, kx, c) order, matching the row order of vmm_matrix().
QuantTensor im2col(const QuantTensor& input, const LayerGeometry& layer);

}  // namespace xbarsec
