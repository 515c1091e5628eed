#include "xbarsec/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "xbarsec/error.hpp"
#include "xbarsec/rng.hpp"
#include "exception_slot.hpp"

namespace xbarsec {

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kRandomKey: return "random-key";
    case AttackKind::kDivideAndConquer: return "divide-and-conquer";
    case AttackKind::kCorrectKey: return "correct-key";
  }
  return "unknown";
}

double AttackReport::mean() const {
  if (trial_accuracy.empty()) return 0.0;
  return std::accumulate(trial_accuracy.begin(), trial_accuracy.end(), 0.0) /
         static_cast<double>(trial_accuracy.size());
}

double AttackReport::stddev() const {
  if (trial_accuracy.size() < 2) return 0.0;
  const double mu = mean();
  double ss = 0.0;
  for (double a : trial_accuracy) ss += (a - mu) * (a - mu);
  return std::sqrt(ss / static_cast<double>(trial_accuracy.size() - 1));
}

double AttackReport::distinguishable_fraction() const {
  if (dnc.empty()) return 0.0;
  const auto hits = std::count_if(dnc.begin(), dnc.end(), [](const DncResult& r) { return r.distinguishable; });
  return static_cast<double>(hits) / static_cast<double>(dnc.size());
}

NetworkModel public_structure(const MappedModel& mapped) {
  require(!mapped.layers.empty(), "mapped model has no layers");
  NetworkModel m;
  m.input_shape = mapped.layers.front().geom.in_dims;
  m.input_bits = mapped.config.input_bits;
  m.num_classes = shape_numel(mapped.layers.back().geom.out_dims);
  return m;
}

std::vector<QuantTensor> extract_weights(const MappedModel& mapped, const KeyStore& guess) {
  require(guess.layers.size() == mapped.layers.size(), "guessed keys do not match the layer count");
  std::vector<QuantTensor> out;
  out.reserve(mapped.layers.size());
  for (std::size_t l = 0; l < mapped.layers.size(); ++l) {
    out.push_back(demap_layer(mapped.layers[l], mapped.config, guess.layers[l]));
  }
  return out;
}

NetworkModel extracted_model(const MappedModel& mapped, const KeyStore& guess) {
  NetworkModel m = public_structure(mapped);
  auto weights = extract_weights(mapped, guess);
  for (std::size_t l = 0; l < mapped.layers.size(); ++l) {
    m.layers.push_back(with_weight(mapped.layers[l].geom, std::move(weights[l])));
  }
  return m;
}

namespace {

std::vector<std::uint8_t> random_mask(std::mt19937_64& rng, std::size_t total, std::size_t count) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> pick;
  std::sample(all.begin(), all.end(), std::back_inserter(pick), count, rng);
  std::vector<std::uint8_t> m(total, 0);
  for (auto p : pick) m[p] = 1;
  return m;
}

std::vector<std::size_t> predictions(const MappedModel& mapped, const KeyStore& guess,
                                     const Dataset& data, kernels::Exec exec) {
  return predict_reference(extracted_model(mapped, guess), data, exec);
}

double evaluate(const MappedModel& mapped, const KeyStore& guess, const Dataset& data,
                kernels::Exec exec) {
  return accuracy(predictions(mapped, guess, data, exec), data.labels);
}

AttackReport blank_report(AttackKind kind, const MappedModel& mapped, const KeyStore& truth,
                          const Dataset& data) {
  data.validate();
  AttackReport r;
  r.kind = kind;
  r.num_classes = data.num_classes;
  r.samples = data.size();
  r.baseline_accuracy = evaluate(mapped, truth, data, kernels::Exec::kParallel);
  return r;
}

}  // namespace

KeyStore random_guess(const MappedModel& mapped, std::mt19937_64& rng) {
  const auto& config = mapped.config;
  KeyStore ks;
  ks.config = config;
  std::bernoulli_distribution coin(0.5);
  for (const auto& layer : mapped.layers) {
    LayerKeys lk;
    lk.protect = layer.protect;
    for (const auto& tile : layer.tiles) {
      TileKey k;
      k.blocks = config.blocks();
      k.cols = config.data_cols();
      k.transform.assign(k.blocks * k.cols, 0);
      if (layer.protect) {
        for (auto& b : k.transform) b = coin(rng) ? 1 : 0;
        if (tile.geom.padded) {
          k.row_mask = random_mask(rng, config.rows, tile.geom.rows);
          k.col_mask = random_mask(rng, config.data_cols(), tile.geom.cols);
        }
      }
      lk.tiles.push_back(std::move(k));
    }
    ks.layers.push_back(std::move(lk));
  }
  return ks;
}

AttackReport attack_random_keys(const MappedModel& mapped, const KeyStore& truth,
                                const Dataset& data, std::size_t trials, std::uint64_t seed) {
  require(trials >= 1, "attack needs at least one trial");
  AttackReport r = blank_report(AttackKind::kRandomKey, mapped, truth, data);
  r.trial_accuracy.assign(trials, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(trials);
  detail::ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    slot.guard([&] {
      std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
      const auto guess = random_guess(mapped, rng);
      r.trial_accuracy[static_cast<std::size_t>(t)] = evaluate(mapped, guess, data, kernels::Exec::kSerial);
    });
  }
  slot.rethrow();
  return r;
}

AttackReport attack_correct_keys(const MappedModel& mapped, const KeyStore& truth,
                                 const Dataset& data) {
  AttackReport r = blank_report(AttackKind::kCorrectKey, mapped, truth, data);
  r.trial_accuracy.push_back(r.baseline_accuracy);
  return r;
}

std::vector<DncTarget> sample_targets(const MappedModel& mapped, const KeyStore& truth,
                                      std::size_t count, std::uint64_t seed) {
  const auto& config = mapped.config;
  std::vector<DncTarget> pool;
  for (std::size_t l = 0; l < mapped.layers.size(); ++l) {
    const auto& layer = mapped.layers[l];
    if (!layer.protect) continue;
    for (std::size_t t = 0; t < layer.tiles.size(); ++t) {
      const auto& g = layer.tiles[t].geom;
      const auto& key = truth.layers.at(l).tiles.at(t);
      const auto rpos = mask_positions(key.row_mask, g.rows);
      const auto cpos = mask_positions(key.col_mask, g.cols);
      std::set<std::size_t> blocks;
      for (auto r : rpos) blocks.insert(r / config.block_rows);
      for (auto b : blocks)
        for (auto c : cpos) pool.push_back({l, t, b, c});
    }
  }
  std::vector<DncTarget> out;
  std::mt19937_64 rng(seed);
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), count, rng);
  return out;
}

AttackReport attack_divide_and_conquer(const MappedModel& mapped, const KeyStore& truth,
                                       const Dataset& data, const std::vector<DncTarget>& targets,
                                       std::uint64_t seed, const DncOptions& opts) {
  AttackReport r = blank_report(AttackKind::kDivideAndConquer, mapped, truth, data);
  if (targets.empty()) return r;

  std::mt19937_64 rng(seed);
  KeyStore base = random_guess(mapped, rng);
  if (opts.known_masks) {
    for (std::size_t l = 0; l < base.layers.size(); ++l) {
      for (std::size_t t = 0; t < base.layers[l].tiles.size(); ++t) {
        base.layers[l].tiles[t].row_mask = truth.layers[l].tiles[t].row_mask;
        base.layers[l].tiles[t].col_mask = truth.layers[l].tiles[t].col_mask;
      }
    }
  }

  for (const auto& tg : targets) {
    require(tg.layer < base.layers.size() && tg.tile < base.layers[tg.layer].tiles.size() &&
                tg.block < mapped.config.blocks() && tg.col < mapped.config.data_cols(),
            "divide-and-conquer target out of range");
  }

  r.dnc.resize(targets.size());
  const std::size_t n = data.size();
  const auto count = static_cast<std::ptrdiff_t>(targets.size());
  detail::ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    slot.guard([&] {
      const auto& tg = targets[static_cast<std::size_t>(i)];
      KeyStore guess = base;
      auto& key = guess.layers[tg.layer].tiles[tg.tile];

      DncResult res;
      res.target = tg;
      res.correct_bit = truth.layers[tg.layer].tiles[tg.tile].bit(tg.block, tg.col);
      key.set_bit(tg.block, tg.col, false);
      const auto p0 = predictions(mapped, guess, data, kernels::Exec::kSerial);
      key.set_bit(tg.block, tg.col, true);
      const auto p1 = predictions(mapped, guess, data, kernels::Exec::kSerial);
      res.acc_bit0 = accuracy(p0, data.labels);
      res.acc_bit1 = accuracy(p1, data.labels);

      // Both guesses are scored on the same samples, so the test statistic
      // is the mean of the paired per-sample differences.
      const auto& good = res.correct_bit ? p1 : p0;
      const auto& bad = res.correct_bit ? p0 : p1;
      double sum = 0.0, sq = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const auto label = static_cast<std::size_t>(data.labels[s]);
        const double d = (good[s] == label ? 1.0 : 0.0) - (bad[s] == label ? 1.0 : 0.0);
        sum += d;
        sq += d * d;
      }
      const double nd = static_cast<double>(n);
      res.gap = sum / nd;
      const double var = n > 1 ? (sq - nd * res.gap * res.gap) / (nd - 1) : 0.0;
      res.threshold = opts.se_multiplier * std::sqrt(std::max(var, 0.0) / nd);
      res.distinguishable = res.gap > 0.0 && res.gap > res.threshold;
      r.dnc[static_cast<std::size_t>(i)] = res;
    });
  }
  slot.rethrow();
  return r;
}

std::vector<SweepEntry> protection_sweep(const NetworkModel& model, const CrossbarConfig& config,
                                         const Dataset& data, std::size_t trials,
                                         std::uint64_t seed) {
  model.validate();
  std::vector<SweepEntry> out;
  const std::size_t nl = model.layers.size();
  for (std::size_t which = 0; which <= nl; ++which) {
    // which == nl protects every layer
    std::vector<bool> flags(nl, false);
    for (std::size_t l = 0; l < nl; ++l) flags[l] = which == nl || l == which;
    const auto plans = plans_of(model.layers, flags);
    const auto keys = generate_keys(config, plans, mix_seed(seed, 7000 + which));
    const auto mapped = map_model(model.layers, config, keys);
    SweepEntry e;
    e.label = which == nl ? "all" : "layer" + std::to_string(which);
    e.report = attack_random_keys(mapped, keys, data, trials, mix_seed(seed, 9000 + which));
    e.report.label = e.label;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace xbarsec
