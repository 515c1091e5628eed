#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "support.hpp"
#include "xbarsec/adversary.hpp"
#include "xbarsec/error.hpp"
#include "xbarsec/io.hpp"

using namespace xbarsec;
using namespace xbarsec::test;

namespace {

struct Victim {
  NetworkModel model;
  Dataset data;
  CrossbarConfig config;
  KeyStore keys;
  MappedModel mapped;
};

Victim victim(Scheme scheme, std::vector<bool> protect, std::size_t samples, std::size_t block_rows = 32) {
  Victim v;
  v.model = io::load_model(data_dir() / "mlp.json");
  v.data = io::load_dataset(data_dir() / "digits_test.json");
  v.data.inputs.resize(samples);
  v.data.labels.resize(samples);
  v.config = CrossbarConfig::evaluation_default(scheme);
  v.config.block_rows = block_rows;
  v.keys = generate_keys(v.config, plans_of(v.model.layers, protect), 2024);
  v.mapped = map_model(v.model.layers, v.config, v.keys);
  return v;
}

}  // namespace

TEST_SUITE("adversary") {

TEST_CASE("public structure plus true keys rebuilds the victim") {
  for (auto scheme : {Scheme::kBiased, Scheme::kDifferential}) {
    const auto v = victim(scheme, {}, 50);
    const auto skel = public_structure(v.mapped);
    CHECK(skel.input_shape == v.model.input_shape);
    CHECK(skel.num_classes == 10);
    CHECK(skel.layers.empty());
    const auto stolen = extracted_model(v.mapped, v.keys);
    REQUIRE(stolen.layers.size() == v.model.layers.size());
    for (std::size_t l = 0; l < stolen.layers.size(); ++l) CHECK(stolen.layers[l].weight == v.model.layers[l].weight);
  }
}

TEST_CASE("random guesses have the right shape and mask popcounts") {
  const auto v = victim(Scheme::kBiased, {true, false}, 10);
  std::mt19937_64 rng(5);
  const auto g = random_guess(v.mapped, rng);
  REQUIRE(g.layers.size() == 2);
  const auto& t0 = g.layers[0].tiles[0];
  REQUIRE(t0.padded());
  CHECK(std::accumulate(t0.row_mask.begin(), t0.row_mask.end(), 0) == 64);
  CHECK(std::accumulate(t0.col_mask.begin(), t0.col_mask.end(), 0) == 32);
  const auto& t1 = g.layers[1].tiles[0];
  CHECK_FALSE(t1.padded());
  CHECK(std::all_of(t1.transform.begin(), t1.transform.end(), [](auto b) { return b == 0; }));
  // The unprotected layer is read in the clear.
  CHECK(extract_weights(v.mapped, g)[1] == v.model.layers[1].weight);
}

TEST_CASE("random-key attack is reproducible and validates its trial count") {
  const auto v = victim(Scheme::kBiased, {}, 60);
  const auto a = attack_random_keys(v.mapped, v.keys, v.data, 4, 77);
  const auto b = attack_random_keys(v.mapped, v.keys, v.data, 4, 77);
  CHECK(a.trial_accuracy == b.trial_accuracy);
  CHECK(a.trials() == 4);
  CHECK(a.samples == 60);
  CHECK(a.chance() == doctest::Approx(0.1));
  CHECK_THROWS_AS(attack_random_keys(v.mapped, v.keys, v.data, 0, 1), ValidationError);
}

TEST_CASE("correct-key control reaches the reference accuracy") {
  const auto v = victim(Scheme::kDifferential, {}, 200);
  const auto r = attack_correct_keys(v.mapped, v.keys, v.data);
  CHECK(r.mean() == doctest::Approx(accuracy(predict_reference(v.model, v.data), v.data.labels)));
  CHECK(r.baseline_accuracy == r.mean());
}

TEST_CASE("report statistics") {
  AttackReport r;
  r.trial_accuracy = {0.1, 0.2, 0.3};
  CHECK(r.mean() == doctest::Approx(0.2));
  CHECK(r.stddev() == doctest::Approx(0.1));
  r.trial_accuracy = {0.5};
  CHECK(r.stddev() == 0.0);
}

TEST_CASE("sampled targets are distinct and cover real weights only") {
  const auto v = victim(Scheme::kBiased, {}, 10);
  const auto targets = sample_targets(v.mapped, v.keys, 300, 4);
  CHECK(targets.size() == 300);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> seen;
  for (const auto& t : targets) {
    seen.insert({t.layer, t.tile, t.block, t.col});
    const auto& key = v.keys.layers[t.layer].tiles[t.tile];
    CHECK(key.col_mask[t.col] == 1);
    bool real_row = false;
    for (std::size_t i = t.block * 32; i < (t.block + 1) * 32; ++i) real_row |= key.row_mask[i] == 1;
    CHECK(real_row);
  }
  CHECK(seen.size() == 300);
}

TEST_CASE("divide-and-conquer harness detects a key bit when little else is hidden") {
  // Control: one block per column (x = M), only the output layer protected
  // and its masks handed to the adversary. Each target bit then decides the
  // sign of one whole class score, which the accuracy exposes.
  const auto v = victim(Scheme::kBiased, {false, true}, 300, 256);
  const auto targets = sample_targets(v.mapped, v.keys, 10, 1);
  REQUIRE(targets.size() == 10);
  const auto r = attack_divide_and_conquer(v.mapped, v.keys, v.data, targets, 3, {true, 3.0});
  CHECK(r.distinguishable_fraction() >= 0.5);
  for (const auto& d : r.dnc) {
    CHECK(d.gap == doctest::Approx(d.correct_bit ? d.acc_bit1 - d.acc_bit0 : d.acc_bit0 - d.acc_bit1));
  }
}

TEST_CASE("divide-and-conquer rejects out-of-range targets") {
  const auto v = victim(Scheme::kBiased, {}, 20);
  const std::vector<DncTarget> bad{{0, 5, 0, 0}};
  CHECK_THROWS_AS(attack_divide_and_conquer(v.mapped, v.keys, v.data, bad, 1), ValidationError);
}

TEST_CASE("protection sweep labels one entry per layer plus all") {
  auto model = io::load_model(data_dir() / "mlp.json");
  auto data = io::load_dataset(data_dir() / "digits_test.json");
  data.inputs.resize(40);
  data.labels.resize(40);
  const auto sweep = protection_sweep(model, CrossbarConfig::evaluation_default(Scheme::kBiased), data, 2, 9);
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].label == "layer0");
  CHECK(sweep[1].label == "layer1");
  CHECK(sweep[2].label == "all");
  for (const auto& e : sweep) CHECK(e.report.trials() == 2);
}

}
