// Serial vs OpenMP timing of the crossbar kernels and of batch inference.
//   bench_kernels [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#include <omp.h>

#include "xbarsec/kernels.hpp"
#include "xbarsec/nn.hpp"
#include "xbarsec/secure_map.hpp"

using namespace xbarsec;
using Clock = std::chrono::steady_clock;

template <typename Fn>
double best_ms(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  return best;
}

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(1);
  std::printf("threads: %d\n", omp_get_max_threads());

  std::printf("%-28s %10s %10s %8s\n", "segment_vmm", "serial ms", "omp ms", "speedup");
  for (std::size_t m : {256u, 512u, 1024u}) {
    const std::size_t n = m;
    const std::size_t seg = 16;
    std::vector<std::uint16_t> cells(m * n);
    std::vector<std::int32_t> x(m);
    for (auto& c : cells) c = static_cast<std::uint16_t>(rng() & 1);
    for (auto& v : x) v = static_cast<std::int32_t>(rng() & 255);
    std::vector<Acc> a(m / seg * n), b(a.size());
    const kernels::CellView view{cells.data(), m, n};
    const double ts = best_ms(reps, [&] { for (int i = 0; i < 20; ++i) kernels::serial::segment_vmm(view, x, seg, a); });
    const double tp = best_ms(reps, [&] { for (int i = 0; i < 20; ++i) kernels::omp::segment_vmm(view, x, seg, b); });
    if (a != b) {
      std::fprintf(stderr, "kernel mismatch at %zux%zu\n", m, n);
      return 1;
    }
    char label[64];
    std::snprintf(label, sizeof label, "%zux%zu, 20 calls", m, n);
    std::printf("%-28s %10.3f %10.3f %8.2f\n", label, ts, tp, ts / tp);
  }

  // Batch inference of a 256-256-10 MLP mapped with scheme 1.
  auto rand_w = [&](std::size_t r, std::size_t c) {
    std::vector<std::int32_t> v(r * c);
    for (auto& w : v) w = static_cast<std::int32_t>(rng() % 256) - 128;
    return QuantTensor({r, c}, std::move(v), 8, true);
  };
  NetworkModel model;
  model.input_shape = {256};
  model.num_classes = 10;
  model.layers.push_back(make_fc(rand_w(256, 256), {Activation::Kind::kRelu, 10}));
  model.layers.push_back(make_fc(rand_w(256, 10), {Activation::Kind::kNone, 0}));
  Dataset data;
  data.input_shape = {256};
  data.num_classes = 10;
  for (int s = 0; s < 64; ++s) {
    std::vector<std::int32_t> x(256);
    for (auto& v : x) v = static_cast<std::int32_t>(rng() & 255);
    data.inputs.push_back(std::move(x));
    data.labels.push_back(s % 10);
  }
  const auto config = CrossbarConfig::evaluation_default(Scheme::kBiased);
  const auto keys = generate_keys(config, plans_of(model.layers), 1);
  const auto mapped = map_model(model.layers, config, keys);
  std::vector<std::size_t> ps, pp;
  const double ts = best_ms(reps, [&] { ps = predict_mapped(mapped, keys, data, kernels::Exec::kSerial); });
  const double tp = best_ms(reps, [&] { pp = predict_mapped(mapped, keys, data, kernels::Exec::kParallel); });
  if (ps != pp) {
    std::fprintf(stderr, "prediction mismatch\n");
    return 1;
  }
  std::printf("%-28s %10.3f %10.3f %8.2f\n", "predict_mapped, 64 samples", ts, tp, ts / tp);
  return 0;
}
