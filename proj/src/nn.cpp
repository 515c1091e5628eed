#include "xbarsec/nn.hpp"

#include <algorithm>
#include <string>

#include "xbarsec/decoder.hpp"
#include "xbarsec/error.hpp"
#include "exception_slot.hpp"

namespace xbarsec {

std::vector<LayerGeometry> NetworkModel::geometry() const {
  std::vector<LayerGeometry> g;
  g.reserve(layers.size());
  for (const auto& l : layers) g.push_back(l);
  return g;
}

void NetworkModel::validate() const {
  require(!layers.empty(), "network has no layers");
  require(input_bits >= 1 && input_bits <= 16, "network input bits must be in [1, 16]");
  Shape cur = input_shape;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    require(shape_numel(layers[l].in_dims) == shape_numel(cur),
            "layer " + std::to_string(l) + " expects " +
                std::to_string(shape_numel(layers[l].in_dims)) + " inputs but receives " +
                std::to_string(shape_numel(cur)));
    if (layers[l].kind == LayerKind::kConv) {
      require(layers[l].in_dims == cur || cur.size() == 1,
              "layer " + std::to_string(l) + " input shape does not chain");
    }
    cur = layers[l].out_dims;
  }
  require(shape_numel(cur) == num_classes, "last layer produces " +
                                               std::to_string(shape_numel(cur)) +
                                               " scores, expected " +
                                               std::to_string(num_classes) + " classes");
}

void Dataset::validate() const {
  require(!inputs.empty(), "dataset is empty");
  require(inputs.size() == labels.size(), "dataset inputs and labels differ in count");
  const std::size_t n = shape_numel(input_shape);
  const auto hi = range_max(bits, false);
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    require(inputs[s].size() == n, "dataset sample " + std::to_string(s) + " has wrong length");
    for (auto v : inputs[s]) {
      require(v >= 0 && v <= hi, "dataset sample " + std::to_string(s) + " out of input range");
    }
    require(labels[s] >= 0 && static_cast<std::size_t>(labels[s]) < num_classes,
            "dataset label out of range");
  }
}

namespace {

// Input vectors of every VMM the layer needs: the input itself for FC, the
// im2col patch rows for Conv.
QuantTensor vmm_inputs(const LayerGeometry& geom, std::span<const std::int32_t> input,
                       int input_bits) {
  require(input.size() == shape_numel(geom.in_dims),
          "layer input has " + std::to_string(input.size()) + " values, expected " +
              std::to_string(shape_numel(geom.in_dims)));
  QuantTensor x(geom.in_dims, std::vector<std::int32_t>(input.begin(), input.end()), input_bits,
                false);
  if (geom.kind == LayerKind::kFC) return x.reshaped({1, input.size()});
  return im2col(x, geom);
}

std::span<const std::int32_t> row_of(const QuantTensor& m, std::size_t r) {
  return m.data().subspan(r * m.cols(), m.cols());
}

}  // namespace

std::vector<Acc> layer_forward_reference(const LayerSpec& layer, std::span<const std::int32_t> input,
                                         int input_bits) {
  const QuantTensor patches = vmm_inputs(layer, input, input_bits);
  const QuantTensor w = layer.vmm_matrix();
  const std::size_t n = w.cols();
  std::vector<Acc> out(patches.rows() * n);
  for (std::size_t p = 0; p < patches.rows(); ++p) {
    const auto y = matmul_oracle(row_of(patches, p), w);
    std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(p * n));
  }
  return out;
}

std::vector<Acc> infer_reference(const NetworkModel& model, std::span<const std::int32_t> input) {
  require(input.size() == shape_numel(model.input_shape), "input does not match model input shape");
  std::vector<std::int32_t> x(input.begin(), input.end());
  std::vector<Acc> y;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    y = layer_forward_reference(model.layers[l], x, model.input_bits);
    if (l + 1 < model.layers.size()) x = apply_activation(y, model.layers[l].activation, model.input_bits);
  }
  return y;
}

std::vector<Acc> mapped_vmm(const MappedLayer& layer, const LayerKeys& keys,
                            const CrossbarConfig& config, std::span<const std::int32_t> x,
                            kernels::Exec exec, InferenceStats* stats) {
  const std::size_t m = layer.geom.vmm_rows();
  const std::size_t n = layer.geom.vmm_cols();
  require(x.size() == m, "mapped_vmm: input length mismatch");
  require(keys.tiles.size() == layer.tiles.size(), "mapped_vmm: key/model tile count mismatch");

  const bool biased = config.scheme == Scheme::kBiased;
  const auto g_count = static_cast<std::size_t>(config.groups);
  std::vector<Acc> y(n, 0);
  Acc input_sum = 0;
  std::vector<Acc> group_partials(g_count);
  std::vector<std::int32_t> phys(config.rows);
  DecoderContext ctx(config);

  for (std::size_t t = 0; t < layer.tiles.size(); ++t) {
    const auto& tile = layer.tiles[t];
    const auto& key = keys.tiles[t];
    const auto& g = tile.geom;
    require(key.blocks == config.blocks() && key.cols == config.data_cols(),
            "mapped_vmm: key shape does not match the crossbar geometry");

    // The keys route real inputs to their rows and pick the real output
    // columns; fake and unused rows are driven with zero.
    const auto row_pos = mask_positions(key.row_mask, g.rows);
    const auto col_pos = mask_positions(key.col_mask, g.cols);
    std::fill(phys.begin(), phys.end(), 0);
    for (std::size_t i = 0; i < g.rows; ++i) phys[row_pos[i]] = x[g.row0 + i];

    std::vector<std::vector<Acc>> decoded(g_count);
    for (std::size_t s = 0; s < g_count; ++s) {
      const auto seg = xbar_vmm_segments(tile.groups[s], phys, exec);
      if (biased && s == 0 && g.col_tile == 0) {
        for (std::size_t k = 0; k < config.segments(); ++k)
          input_sum += seg[k * config.cols + config.cols - 1];
      }
      decoded[s] = decode_block_pipeline(seg, key, config, ctx);
    }
    for (std::size_t j = 0; j < g.cols; ++j) {
      const std::size_t pc = col_pos[j];
      for (std::size_t s = 0; s < g_count; ++s) group_partials[s] = decoded[s][pc];
      y[g.col0 + j] += shift_add_combine(group_partials, config);
    }
    if (stats) stats->adc_samples += g_count * config.segments() * config.cols;
  }
  if (biased) {
    for (auto& v : y) v -= layer.bias_offset * input_sum;
  }
  if (stats) {
    stats->vmm_ops += 1;
    stats->bias_cycles += ctx.bias_cycles();
  }
  return y;
}

std::vector<Acc> infer_mapped(const MappedModel& mapped, const KeyStore& keys,
                              std::span<const std::int32_t> input, kernels::Exec exec,
                              InferenceStats* stats) {
  require(keys.layers.size() == mapped.layers.size(), "key store and mapped model differ in layers");
  const int bits = mapped.config.input_bits;
  std::vector<std::int32_t> x(input.begin(), input.end());
  std::vector<Acc> y;
  for (std::size_t l = 0; l < mapped.layers.size(); ++l) {
    const auto& layer = mapped.layers[l];
    const QuantTensor patches = vmm_inputs(layer.geom, x, bits);
    const std::size_t n = layer.geom.vmm_cols();
    y.assign(patches.rows() * n, 0);
    for (std::size_t p = 0; p < patches.rows(); ++p) {
      const auto out = mapped_vmm(layer, keys.layers[l], mapped.config, row_of(patches, p), exec, stats);
      std::copy(out.begin(), out.end(), y.begin() + static_cast<std::ptrdiff_t>(p * n));
    }
    if (l + 1 < mapped.layers.size()) x = apply_activation(y, layer.geom.activation, bits);
  }
  return y;
}

std::size_t argmax(std::span<const Acc> scores) {
  require(!scores.empty(), "argmax of empty scores");
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

namespace {

template <typename Fn>
std::vector<std::size_t> predict_all(const Dataset& data, kernels::Exec exec, Fn&& fn) {
  const auto count = static_cast<std::ptrdiff_t>(data.size());
  std::vector<std::size_t> pred(data.size());
  if (exec == kernels::Exec::kParallel) {
    detail::ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t s = 0; s < count; ++s)
      slot.guard([&] { pred[static_cast<std::size_t>(s)] = fn(s); });
    slot.rethrow();
  } else {
    for (std::ptrdiff_t s = 0; s < count; ++s) pred[static_cast<std::size_t>(s)] = fn(s);
  }
  return pred;
}

}  // namespace

std::vector<std::size_t> predict_reference(const NetworkModel& model, const Dataset& data,
                                           kernels::Exec exec) {
  return predict_all(data, exec, [&](std::ptrdiff_t s) {
    return argmax(infer_reference(model, data.inputs[static_cast<std::size_t>(s)]));
  });
}

std::vector<std::size_t> predict_mapped(const MappedModel& mapped, const KeyStore& keys,
                                        const Dataset& data, kernels::Exec exec,
                                        InferenceStats* stats) {
  std::vector<InferenceStats> per_sample(stats ? data.size() : 0);
  auto pred = predict_all(data, exec, [&](std::ptrdiff_t s) {
    const auto su = static_cast<std::size_t>(s);
    return argmax(infer_mapped(mapped, keys, data.inputs[su], kernels::Exec::kSerial,
                               stats ? &per_sample[su] : nullptr));
  });
  if (stats) {
    for (const auto& st : per_sample) *stats += st;
  }
  return pred;
}

double accuracy(std::span<const std::size_t> predictions, std::span<const int> labels) {
  require(!labels.empty(), "accuracy over an empty dataset");
  require(predictions.size() == labels.size(), "prediction and label counts differ");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == static_cast<std::size_t>(labels[i])) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace xbarsec
