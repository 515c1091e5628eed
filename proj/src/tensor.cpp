#include "xbarsec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "xbarsec/error.hpp"

namespace xbarsec {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::int64_t range_min(int bits, bool is_signed) {
  return is_signed ? -(std::int64_t{1} << (bits - 1)) : 0;
}

std::int64_t range_max(int bits, bool is_signed) {
  return is_signed ? (std::int64_t{1} << (bits - 1)) - 1 : (std::int64_t{1} << bits) - 1;
}

QuantTensor::QuantTensor(Shape shape, std::vector<std::int32_t> data, int bits, bool is_signed,
                         double scale)
    : shape_(std::move(shape)), data_(std::move(data)), bits_(bits), signed_(is_signed),
      scale_(scale) {
  require(bits_ >= 1 && bits_ <= 31, "tensor bits must be in [1, 31], got " + std::to_string(bits_));
  require(shape_numel(shape_) == data_.size(),
          "tensor shape holds " + std::to_string(shape_numel(shape_)) + " elements but data has " +
              std::to_string(data_.size()));
  const auto lo = range_min(bits_, signed_);
  const auto hi = range_max(bits_, signed_);
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (data_[i] < lo || data_[i] > hi) {
      throw ValidationError("tensor element " + std::to_string(i) + " = " +
                            std::to_string(data_[i]) + " outside " + std::to_string(bits_) +
                            "-bit " + (signed_ ? "signed" : "unsigned") + " range");
    }
  }
}

std::size_t QuantTensor::rows() const {
  require(rank() == 2, "rows() needs a rank-2 tensor");
  return shape_[0];
}

std::size_t QuantTensor::cols() const {
  require(rank() == 2, "cols() needs a rank-2 tensor");
  return shape_[1];
}

std::int32_t QuantTensor::min_value() const {
  require(!data_.empty(), "min of empty tensor");
  return *std::min_element(data_.begin(), data_.end());
}

std::int32_t QuantTensor::max_value() const {
  require(!data_.empty(), "max of empty tensor");
  return *std::max_element(data_.begin(), data_.end());
}

QuantTensor QuantTensor::reshaped(Shape shape) const {
  return QuantTensor(std::move(shape), data_, bits_, signed_, scale_);
}

QuantTensor quantize(std::span<const double> values, int bits, bool is_signed) {
  return quantize(values, Shape{values.size()}, bits, is_signed);
}

QuantTensor quantize(std::span<const double> values, Shape shape, int bits, bool is_signed) {
  require(!values.empty(), "quantize: empty input");
  require(bits >= 1 && bits <= 16, "quantize: bits must be in [1, 16], got " + std::to_string(bits));
  if (is_signed) require(bits >= 2, "quantize: signed quantization needs at least 2 bits");

  double max_abs = 0.0;
  for (double v : values) {
    require(std::isfinite(v), "quantize: non-finite input");
    max_abs = std::max(max_abs, std::abs(v));
  }
  const auto hi = range_max(bits, is_signed);
  const auto lo = range_min(bits, is_signed);
  const double scale = max_abs > 0.0 ? max_abs / static_cast<double>(hi) : 1.0;

  std::vector<std::int32_t> q(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    // std::round rounds halfway cases away from zero.
    const double r = std::round(values[i] / scale);
    q[i] = static_cast<std::int32_t>(std::clamp<double>(r, static_cast<double>(lo),
                                                        static_cast<double>(hi)));
  }
  return QuantTensor(std::move(shape), std::move(q), bits, is_signed, scale);
}

std::vector<double> dequantize(const QuantTensor& t) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i] * t.scale();
  return out;
}

std::vector<Acc> matmul_oracle(std::span<const std::int32_t> x, const QuantTensor& w) {
  require(w.rank() == 2, "matmul_oracle: weight must be a matrix");
  require(x.size() == w.rows(), "matmul_oracle: input length " + std::to_string(x.size()) +
                                    " != weight rows " + std::to_string(w.rows()));
  const std::size_t n = w.cols();
  std::vector<Acc> y(n, 0);
  const auto wd = w.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Acc xi = x[i];
    if (xi == 0) continue;
    const std::int32_t* row = wd.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) y[j] += static_cast<Acc>(row[j]) * xi;
  }
  return y;
}

std::size_t LayerGeometry::vmm_rows() const {
  return kind == LayerKind::kFC ? weight_shape.at(0) : kernel_h * kernel_w * in_dims.at(2);
}

std::size_t LayerGeometry::vmm_cols() const { return weight_shape.back(); }

std::size_t LayerGeometry::vmm_count() const {
  return kind == LayerKind::kFC ? 1 : out_dims.at(0) * out_dims.at(1);
}

void LayerGeometry::validate() const {
  require(weight_bits >= 2 && weight_bits <= 16, "layer weight bits must be in [2, 16]");
  require(activation.shift >= 0 && activation.shift < 63, "activation shift out of range");
  if (kind == LayerKind::kFC) {
    require(weight_shape.size() == 2, "FC weight must be (m, n)");
    require(in_dims == Shape{weight_shape[0]}, "FC in_dims must be {m}");
    require(out_dims == Shape{weight_shape[1]}, "FC out_dims must be {n}");
    return;
  }
  require(weight_shape.size() == 4, "Conv weight must be (KH, KW, C, OC)");
  require(in_dims.size() == 3 && out_dims.size() == 3, "Conv dims must be {H, W, C}");
  require(stride >= 1, "Conv stride must be >= 1");
  require(weight_shape[0] == kernel_h && weight_shape[1] == kernel_w, "Conv kernel size mismatch");
  require(weight_shape[2] == in_dims[2], "Conv weight channels != input channels");
  require(in_dims[0] + 2 * padding >= kernel_h && in_dims[1] + 2 * padding >= kernel_w,
          "Conv kernel larger than padded input");
  const std::size_t oh = (in_dims[0] + 2 * padding - kernel_h) / stride + 1;
  const std::size_t ow = (in_dims[1] + 2 * padding - kernel_w) / stride + 1;
  require(out_dims == Shape{oh, ow, weight_shape[3]}, "Conv out_dims inconsistent with geometry");
}

QuantTensor LayerSpec::vmm_matrix() const {
  if (kind == LayerKind::kFC) return weight;
  return weight.reshaped({vmm_rows(), vmm_cols()});
}

void LayerSpec::validate() const {
  LayerGeometry::validate();
  require(weight.shape() == weight_shape, "layer weight tensor shape != declared weight shape");
  // Weights read back under wrong keys may need one bit more than declared.
  require(weight.is_signed() && weight.bits() >= weight_bits && weight.bits() <= 17,
          "layer weights must be signed and at least " + std::to_string(weight_bits) + "-bit");
}

LayerSpec with_weight(const LayerGeometry& geom, QuantTensor weight) {
  LayerSpec l;
  static_cast<LayerGeometry&>(l) = geom;
  l.weight = std::move(weight);
  l.validate();
  return l;
}

LayerSpec make_fc(QuantTensor weight, Activation act) {
  require(weight.rank() == 2, "FC weight must be (m, n)");
  LayerGeometry g;
  g.kind = LayerKind::kFC;
  g.in_dims = {weight.rows()};
  g.out_dims = {weight.cols()};
  g.weight_shape = weight.shape();
  g.weight_bits = weight.bits();
  g.activation = act;
  return with_weight(g, std::move(weight));
}

LayerSpec make_conv(Shape in_dims, QuantTensor weight, std::size_t stride, std::size_t padding,
                    Activation act) {
  require(weight.rank() == 4, "Conv weight must be (KH, KW, C, OC)");
  require(in_dims.size() == 3, "Conv in_dims must be {H, W, C}");
  require(stride >= 1, "Conv stride must be >= 1");
  LayerGeometry g;
  g.kind = LayerKind::kConv;
  g.kernel_h = weight.shape()[0];
  g.kernel_w = weight.shape()[1];
  g.stride = stride;
  g.padding = padding;
  require(in_dims[0] + 2 * padding >= g.kernel_h && in_dims[1] + 2 * padding >= g.kernel_w,
          "Conv kernel larger than padded input");
  const std::size_t oh = (in_dims[0] + 2 * padding - g.kernel_h) / stride + 1;
  const std::size_t ow = (in_dims[1] + 2 * padding - g.kernel_w) / stride + 1;
  g.out_dims = {oh, ow, weight.shape()[3]};
  g.in_dims = std::move(in_dims);
  g.weight_shape = weight.shape();
  g.weight_bits = weight.bits();
  g.activation = act;
  return with_weight(g, std::move(weight));
}

std::vector<std::int32_t> apply_activation(std::span<const Acc> y, const Activation& act,
                                           int out_bits) {
  const Acc hi = range_max(out_bits, false);
  std::vector<std::int32_t> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    Acc v = y[i];
    if (act.kind == Activation::Kind::kRelu && v < 0) v = 0;
    v >>= act.shift;  // arithmetic: floor division by 2^shift
    out[i] = static_cast<std::int32_t>(std::clamp<Acc>(v, 0, hi));
  }
  return out;
}

QuantTensor im2col(const QuantTensor& input, const LayerGeometry& layer) {
  require(layer.kind == LayerKind::kConv, "im2col: layer is not a Conv");
  require(shape_numel(layer.in_dims) == input.size(),
          "im2col: input has " + std::to_string(input.size()) + " elements, layer expects " +
              std::to_string(shape_numel(layer.in_dims)));
  const std::size_t h = layer.in_dims[0], w = layer.in_dims[1], c = layer.in_dims[2];
  const std::size_t oh = layer.out_dims[0], ow = layer.out_dims[1];
  const std::size_t kh = layer.kernel_h, kw = layer.kernel_w;
  const std::size_t k = kh * kw * c;
  const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
  const auto in = input.data();

  std::vector<std::int32_t> out(oh * ow * k, 0);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      std::int32_t* row = out.data() + (oy * ow + ox) * k;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * layer.stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * layer.stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
          const std::int32_t* px = in.data() + (static_cast<std::size_t>(iy) * w +
                                                static_cast<std::size_t>(ix)) * c;
          std::copy(px, px + c, row + (ky * kw + kx) * c);
        }
      }
    }
  }
  return QuantTensor({oh * ow, k}, std::move(out), input.bits(), input.is_signed());
}

}  // namespace xbarsec
