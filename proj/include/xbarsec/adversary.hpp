#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "xbarsec/nn.hpp"
#include "xbarsec/secure_map.hpp"

namespace xbarsec {

enum class AttackKind { kRandomKey, kDivideAndConquer, kCorrectKey };
const char* to_string(AttackKind kind);

// One (block, column) key bit of one tile, targeted in isolation.
struct DncTarget {
  std::size_t layer = 0;
  std::size_t tile = 0;
  std::size_t block = 0;
  std::size_t col = 0;  // physical data column
};

struct DncResult {
  DncTarget target;
  bool correct_bit = false;
  double acc_bit0 = 0.0;
  double acc_bit1 = 0.0;
  double gap = 0.0;        // accuracy(correct bit) - accuracy(wrong bit)
  double threshold = 0.0;  // se_multiplier standard errors of the paired difference
  bool distinguishable = false;
};

struct AttackReport {
  AttackKind kind = AttackKind::kRandomKey;
  std::string label;               // e.g. "all", "layer0"
  std::size_t num_classes = 0;
  std::size_t samples = 0;
  double baseline_accuracy = 0.0;  // correct-key accuracy of the victim
  std::vector<double> trial_accuracy;
  std::vector<DncResult> dnc;

  std::size_t trials() const { return kind == AttackKind::kDivideAndConquer ? dnc.size() : trial_accuracy.size(); }
  double chance() const { return num_classes ? 1.0 / static_cast<double>(num_classes) : 0.0; }
  double mean() const;
  double stddev() const;  // sample standard deviation, 0 for fewer than 2 trials
  double distinguishable_fraction() const;
};

// Network skeleton the adversary knows: geometry, input precision, classes.
NetworkModel public_structure(const MappedModel& mapped);

// Reads every layer's weights out of the conductances under the guess.
std::vector<QuantTensor> extract_weights(const MappedModel& mapped, const KeyStore& guess);

// The stolen network: public structure plus extracted weights.
NetworkModel extracted_model(const MappedModel& mapped, const KeyStore& guess);

// Uniformly random guess for every protected layer: transform bits, and
// masks (with the right popcount) for padded tiles. Unprotected layers carry
// no key material and are read directly.
KeyStore random_guess(const MappedModel& mapped, std::mt19937_64& rng);

// Accuracy of the extracted model under random guesses, one guess per trial.
// Trials are independent; trial t draws from mix_seed(seed, t).
AttackReport attack_random_keys(const MappedModel& mapped, const KeyStore& truth,
                                const Dataset& data, std::size_t trials, std::uint64_t seed);

// Control: extraction with the true keys.
AttackReport attack_correct_keys(const MappedModel& mapped, const KeyStore& truth,
                                 const Dataset& data);

struct DncOptions {
  // Give the adversary the true padding masks, so only transform bits
  // remain unknown. Off means masks are guessed like every other key bit.
  bool known_masks = false;
  double se_multiplier = 3.0;
};

// `count` distinct targets drawn from key bits that cover real weights
// (a real column, a block holding at least one real row) of protected layers.
std::vector<DncTarget> sample_targets(const MappedModel& mapped, const KeyStore& truth,
                                      std::size_t count, std::uint64_t seed);

// For each target: fix a random guess for all other bits, evaluate the
// extracted model with the target bit at 0 and 1, and record whether the
// correct value wins by more than se_multiplier standard errors.
AttackReport attack_divide_and_conquer(const MappedModel& mapped, const KeyStore& truth,
                                       const Dataset& data, const std::vector<DncTarget>& targets,
                                       std::uint64_t seed, const DncOptions& opts = {});

struct SweepEntry {
  std::string label;
  AttackReport report;
};

// Single-layer-versus-all protection sweep: for every layer map the model
// with only that layer protected, then with all layers protected, and run
// attack_random_keys on each.
std::vector<SweepEntry> protection_sweep(const NetworkModel& model, const CrossbarConfig& config,
                                         const Dataset& data, std::size_t trials,
                                         std::uint64_t seed);

}  // namespace xbarsec
