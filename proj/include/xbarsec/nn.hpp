#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xbarsec/crossbar.hpp"
#include "xbarsec/kernels.hpp"
#include "xbarsec/secure_map.hpp"
#include "xbarsec/tensor.hpp"

namespace xbarsec {

struct NetworkModel {
  Shape input_shape;
  int input_bits = 8;
  std::size_t num_classes = 0;
  std::vector<LayerSpec> layers;

  std::vector<LayerGeometry> geometry() const;
  // Layer dims chain, the last layer produces num_classes scores.
  void validate() const;
};

struct Dataset {
  Shape input_shape;
  int bits = 8;
  std::size_t num_classes = 0;
  std::vector<std::vector<std::int32_t>> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
  void validate() const;
};

struct InferenceStats {
  std::size_t vmm_ops = 0;      // layer VMMs issued
  std::size_t adc_samples = 0;  // segment x column conversions
  std::size_t bias_cycles = 0;  // scheme-1 bias computations

  InferenceStats& operator+=(const InferenceStats& o) {
    vmm_ops += o.vmm_ops;
    adc_samples += o.adc_samples;
    bias_cycles += o.bias_cycles;
    return *this;
  }
};

// Raw VMM outputs of one layer (vmm_count() x n, row-major), ground truth.
std::vector<Acc> layer_forward_reference(const LayerSpec& layer, std::span<const std::int32_t> input,
                                         int input_bits);

// Layer-by-layer integer inference through matmul_oracle. Returns the last
// layer's raw scores.
std::vector<Acc> infer_reference(const NetworkModel& model, std::span<const std::int32_t> input);

// One VMM of a mapped layer through crossbars and decoders: segment
// activation, per-block decode, block accumulation, Shift&Add, and for
// scheme 1 removal of the global weight offset via the layer input sum.
std::vector<Acc> mapped_vmm(const MappedLayer& layer, const LayerKeys& keys,
                            const CrossbarConfig& config, std::span<const std::int32_t> x,
                            kernels::Exec exec = kernels::Exec::kSerial,
                            InferenceStats* stats = nullptr);

std::vector<Acc> infer_mapped(const MappedModel& mapped, const KeyStore& keys,
                              std::span<const std::int32_t> input,
                              kernels::Exec exec = kernels::Exec::kSerial,
                              InferenceStats* stats = nullptr);

std::size_t argmax(std::span<const Acc> scores);

// Predicted class per dataset sample. kParallel spreads samples over
// OpenMP threads; results are identical either way.
std::vector<std::size_t> predict_reference(const NetworkModel& model, const Dataset& data,
                                           kernels::Exec exec = kernels::Exec::kParallel);
std::vector<std::size_t> predict_mapped(const MappedModel& mapped, const KeyStore& keys,
                                        const Dataset& data,
                                        kernels::Exec exec = kernels::Exec::kParallel,
                                        InferenceStats* stats = nullptr);

double accuracy(std::span<const std::size_t> predictions, std::span<const int> labels);

}  // namespace xbarsec
