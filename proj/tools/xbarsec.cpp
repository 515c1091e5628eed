#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xbarsec/adversary.hpp"
#include "xbarsec/error.hpp"
#include "xbarsec/io.hpp"
#include "xbarsec/nn.hpp"
#include "xbarsec/report.hpp"
#include "xbarsec/rng.hpp"
#include "xbarsec/secure_map.hpp"

using namespace xbarsec;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Crossbar flags shared by map, report and the per-layer sweep. Unset
// flags fall back to the evaluation default of the chosen scheme.
struct GeometryFlags {
  int scheme = 1;
  std::string xbar;
  int pm = 0;
  int groups = 0;
  std::size_t wl_active = 0;
  std::size_t block_x = 0;
  int adc = 0;
  int input_bits = 0;
  bool no_pad = false;

  void add(CLI::App* app) {
    app->add_option("--scheme", scheme, "mapping scheme: 1 (biased) or 2 (differential pair)")
        ->check(CLI::IsMember({1, 2}));
    app->add_option("--xbar", xbar, "crossbar size MxN, N counting the sum column");
    app->add_option("--pm", pm, "device precision p_m in bits")->check(CLI::PositiveNumber);
    app->add_option("--groups", groups, "crossbar groups G per PE")->check(CLI::PositiveNumber);
    app->add_option("--wl-active", wl_active, "word lines activated per ADC sample")->check(CLI::PositiveNumber);
    app->add_option("--block-x", block_x, "rows per key block x")->check(CLI::PositiveNumber);
    app->add_option("--adc", adc, "ADCs per crossbar group")->check(CLI::PositiveNumber);
    app->add_option("--input-bits", input_bits, "activation precision")->check(CLI::PositiveNumber);
    app->add_flag("--no-pad", no_pad, "do not pad partially filled tiles");
  }

  CrossbarConfig config() const {
    auto c = CrossbarConfig::evaluation_default(static_cast<Scheme>(scheme));
    if (!xbar.empty()) {
      std::size_t m = 0, n = 0;
      char sep = 0;
      std::istringstream in(xbar);
      in >> m >> sep >> n;
      require(in && (sep == 'x' || sep == 'X') && in.peek() == EOF && m > 0 && n > 0,
              "--xbar expects MxN, e.g. 256x256, got '" + xbar + "'");
      c.rows = m;
      c.cols = n;
    }
    if (pm) c.device_bits = pm;
    if (groups) c.groups = groups;
    if (wl_active) c.wl_active = wl_active;
    if (block_x) c.block_rows = block_x;
    if (adc) c.adc_per_group = adc;
    if (input_bits) c.input_bits = input_bits;
    if (no_pad) c.pad_small = false;
    c.validate();
    return c;
  }
};

std::vector<bool> parse_protect(const std::string& spec, std::size_t layers) {
  if (spec == "all") return std::vector<bool>(layers, true);
  if (spec == "none") return std::vector<bool>(layers, false);
  std::vector<bool> out(layers, false);
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    std::size_t l = 0;
    try {
      l = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    require(pos == item.size() && !item.empty(), "--protect expects all, none or layer indices like 0,2");
    require(l < layers, "--protect names layer " + item + " but the model has " + std::to_string(layers));
    out[l] = true;
  }
  return out;
}

void emit(bool as_json, const json& j, const std::string& text) {
  if (as_json)
    std::cout << j.dump(1) << "\n";
  else
    std::cout << text;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

// ---- map ---------------------------------------------------------------

struct MapArgs {
  GeometryFlags geo;
  std::string model, out, keys_out, protect = "all";
  std::uint64_t seed = 1;
  bool json = false;
};

int cmd_map(const MapArgs& a) {
  const auto config = a.geo.config();
  const auto model = io::load_model(a.model);
  require(model.input_bits == config.input_bits,
          "model activations are " + std::to_string(model.input_bits) + "-bit but --input-bits is " +
              std::to_string(config.input_bits));
  const auto plans = plans_of(model.layers, parse_protect(a.protect, model.layers.size()));
  const auto keys = generate_keys(config, plans, a.seed);
  const auto mapped = map_model(model.layers, config, keys);
  const fs::path out(a.out);
  const fs::path key_path = a.keys_out.empty() ? out / "keys.json" : fs::path(a.keys_out);
  io::save_mapped(out, mapped);
  io::save_keys(key_path, keys);

  std::size_t tiles = 0;
  for (const auto& l : mapped.layers) tiles += l.tiles.size();
  const json j{{"mapped", (out / "mapped.json").string()},
               {"keys", key_path.string()},
               {"layers", mapped.layers.size()},
               {"tiles", tiles},
               {"security_bits", security_bits(config)},
               {"total_key_bits", keys.total_key_bits()}};
  std::ostringstream t;
  t << "mapped " << mapped.layers.size() << " layers onto " << tiles << " PEs of " << config.groups
    << " groups\n"
    << "security_bits per crossbar" << (config.scheme == Scheme::kDifferential ? " pair" : "") << ": "
    << security_bits(config) << "\n"
    << "key bits stored: " << keys.total_key_bits() << "\n"
    << "wrote " << (out / "mapped.json").string() << " and " << key_path.string() << "\n";
  emit(a.json, j, t.str());
  return 0;
}

// ---- infer -------------------------------------------------------------

struct InferArgs {
  std::string mapped, keys, data, model, scores;
  std::uint64_t seed = 1;
  bool reference = false;
  bool json = false;
};

int cmd_infer(const InferArgs& a) {
  const auto mapped = io::load_mapped(a.mapped);
  const auto data = io::load_dataset(a.data);
  KeyStore keys;
  if (a.keys == "random") {
    std::mt19937_64 rng(a.seed);
    keys = random_guess(mapped, rng);
  } else {
    keys = io::load_keys(a.keys);
    require(keys.config == mapped.config, "key file was generated for a different crossbar config");
  }
  require(keys.layers.size() == mapped.layers.size(), "key file and mapped model differ in layer count");

  // Scores are needed per sample, so predictions are gathered here rather
  // than through predict_mapped.
  const std::size_t n = data.size();
  std::vector<std::vector<Acc>> scores(n);
  InferenceStats stats;
  std::vector<InferenceStats> per(n);
  {
    const auto count = static_cast<std::ptrdiff_t>(n);
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t s = 0; s < count; ++s) {
      try {
        const auto su = static_cast<std::size_t>(s);
        scores[su] = infer_mapped(mapped, keys, data.inputs[su], kernels::Exec::kSerial, &per[su]);
      } catch (...) {
#pragma omp critical(xbarsec_cli_error)
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  }
  std::vector<std::size_t> pred(n);
  for (std::size_t s = 0; s < n; ++s) {
    pred[s] = argmax(scores[s]);
    stats += per[s];
  }
  const double acc = accuracy(pred, data.labels);

  json j{{"samples", n},
         {"accuracy", acc},
         {"keys", a.keys == "random" ? "random" : "file"},
         {"vmm_ops", stats.vmm_ops},
         {"adc_samples", stats.adc_samples},
         {"bias_cycles", stats.bias_cycles}};
  std::ostringstream t;
  t << "accuracy " << pct(acc) << " over " << n << " samples\n";

  if (a.reference) {
    // Oracle: the plaintext model when given, otherwise the weights read
    // back under the same keys, run through exact integer matmuls.
    const auto model = a.model.empty() ? extracted_model(mapped, keys) : io::load_model(a.model);
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < n; ++s)
      if (infer_reference(model, data.inputs[s]) != scores[s]) ++mismatches;
    j["reference_mismatches"] = mismatches;
    t << "reference check: " << (mismatches ? std::to_string(mismatches) + " samples differ" : "bit-exact")
      << "\n";
    if (mismatches) {
      emit(a.json, j, t.str());
      throw ValidationError("mapped inference differs from the reference on " + std::to_string(mismatches) +
                            " samples");
    }
  }

  if (!a.scores.empty()) {
    std::ostringstream csv;
    csv << "sample,label,predicted";
    for (std::size_t c = 0; c < scores.front().size(); ++c) csv << ",score" << c;
    csv << "\n";
    for (std::size_t s = 0; s < n; ++s) {
      csv << s << ',' << data.labels[s] << ',' << pred[s];
      for (auto v : scores[s]) csv << ',' << v;
      csv << "\n";
    }
    io::write_text_atomic(a.scores, csv.str());
    j["scores"] = a.scores;
  }
  emit(a.json, j, t.str());
  return 0;
}

// ---- attack ------------------------------------------------------------

struct AttackArgs {
  GeometryFlags geo;
  std::string mapped, keys, data, mode = "random", out, model;
  std::size_t trials = 40;
  std::size_t targets = 200;
  std::uint64_t seed = 1;
  bool known_masks = false;
  bool per_layer = false;
  bool json = false;
};

int cmd_attack(const AttackArgs& a) {
  const auto data = io::load_dataset(a.data);
  const fs::path out(a.out);

  if (a.per_layer) {
    require(a.mode == "random", "--per-layer runs the random-key attack only");
    require(!a.model.empty(), "--per-layer needs the plaintext --model to remap per layer");
    const auto model = io::load_model(a.model);
    const auto config = a.mapped.empty() ? a.geo.config() : io::load_mapped(a.mapped).config;
    const auto sweep = protection_sweep(model, config, data, a.trials, a.seed);
    std::string csv;
    json entries = json::array();
    std::ostringstream t;
    t << "protected   mean acc   stddev   baseline\n";
    for (const auto& e : sweep) {
      const auto body = io::attack_csv(e.report);
      csv += csv.empty() ? body : body.substr(body.find('\n') + 1);
      entries.push_back(io::to_json(e.report));
      char line[128];
      std::snprintf(line, sizeof line, "%-10s %9s %8.4f %10s\n", e.label.c_str(), pct(e.report.mean()).c_str(),
                    e.report.stddev(), pct(e.report.baseline_accuracy).c_str());
      t << line;
    }
    const json j{{"mode", "random"}, {"per_layer", true}, {"trials", a.trials}, {"seed", a.seed},
                 {"reports", entries}};
    io::write_text_atomic(fs::path(out.string() + ".csv"), csv);
    io::write_json(fs::path(out.string() + ".json"), j);
    emit(a.json, j, t.str());
    return 0;
  }

  require(!a.mapped.empty() && !a.keys.empty(), "attack needs --mapped and --keys (or --per-layer with --model)");
  const auto mapped = io::load_mapped(a.mapped);
  const auto keys = io::load_keys(a.keys);
  require(keys.config == mapped.config, "key file was generated for a different crossbar config");

  AttackReport r;
  if (a.mode == "random") {
    r = attack_random_keys(mapped, keys, data, a.trials, a.seed);
    r.label = "all";
  } else {
    const auto targets = sample_targets(mapped, keys, a.targets, a.seed);
    r = attack_divide_and_conquer(mapped, keys, data, targets, mix_seed(a.seed, 1), {a.known_masks, 3.0});
    r.label = a.known_masks ? "known-masks" : "guessed-masks";
  }
  json j = io::to_json(r);
  j["seed"] = a.seed;
  io::write_text_atomic(fs::path(out.string() + ".csv"), io::attack_csv(r));
  io::write_json(fs::path(out.string() + ".json"), j);

  std::ostringstream t;
  t << to_string(r.kind) << " attack on " << r.samples << " samples, baseline " << pct(r.baseline_accuracy)
    << ", chance " << pct(r.chance()) << "\n";
  if (r.kind == AttackKind::kDivideAndConquer) {
    t << "targets " << r.trials() << ", distinguishable " << pct(r.distinguishable_fraction()) << "\n";
  } else {
    char line[96];
    std::snprintf(line, sizeof line, "trials %zu, mean %s, stddev %.4f\n", r.trials(), pct(r.mean()).c_str(),
                  r.stddev());
    t << line;
  }
  t << "wrote " << out.string() << ".csv and " << out.string() << ".json\n";
  emit(a.json, j, t.str());
  return 0;
}

// ---- report ------------------------------------------------------------

struct ReportArgs {
  GeometryFlags geo;
  std::string out;
  bool json = false;
};

int cmd_report(const ReportArgs& a) {
  const auto config = a.geo.config();
  const auto j = report_json(config);
  if (!a.out.empty()) io::write_json(a.out, j);
  emit(a.json, j, format_report(config));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secure weight mapping on simulated memristor crossbars"};
  app.require_subcommand(1);

  MapArgs map_args;
  auto* map = app.add_subcommand("map", "map a model onto crossbars and generate its keys");
  map_args.geo.add(map);
  map->add_option("--model", map_args.model, "model manifest")->required();
  map->add_option("--out", map_args.out, "output directory for the mapped model")->required();
  map->add_option("--keys-out", map_args.keys_out, "key file path (default <out>/keys.json)");
  map->add_option("--protect", map_args.protect, "layers to protect: all, none, or indices like 0,1");
  map->add_option("--seed", map_args.seed, "key and padding seed");
  map->add_flag("--json", map_args.json, "machine-readable output");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "run a dataset through a mapped model");
  infer->add_option("--mapped", infer_args.mapped, "mapped-model directory")->required();
  infer->add_option("--keys", infer_args.keys, "key file, or 'random' for a random guess")->required();
  infer->add_option("--data", infer_args.data, "dataset file")->required();
  infer->add_option("--model", infer_args.model, "plaintext model used by --reference");
  infer->add_option("--scores", infer_args.scores, "write per-sample scores to this CSV");
  infer->add_option("--seed", infer_args.seed, "seed for --keys random");
  infer->add_flag("--reference", infer_args.reference, "also run the integer reference and require equality");
  infer->add_flag("--json", infer_args.json, "machine-readable output");

  AttackArgs attack_args;
  auto* attack = app.add_subcommand("attack", "attack a mapped model and write CSV and JSON reports");
  attack_args.geo.add(attack);
  attack->add_option("--mapped", attack_args.mapped, "mapped-model directory");
  attack->add_option("--keys", attack_args.keys, "true key file, used for scoring");
  attack->add_option("--data", attack_args.data, "dataset file")->required();
  attack->add_option("--mode", attack_args.mode, "random or dnc")->check(CLI::IsMember({"random", "dnc"}));
  attack->add_option("--trials", attack_args.trials, "random-key trials")->check(CLI::PositiveNumber);
  attack->add_option("--targets", attack_args.targets, "divide-and-conquer targets")->check(CLI::PositiveNumber);
  attack->add_option("--seed", attack_args.seed, "attack seed");
  attack->add_option("--out", attack_args.out, "report path prefix; writes <out>.csv and <out>.json")->required();
  attack->add_option("--model", attack_args.model, "plaintext model for --per-layer");
  attack->add_flag("--per-layer", attack_args.per_layer, "protect one layer at a time, then all");
  attack->add_flag("--known-masks", attack_args.known_masks, "hand the padding masks to the dnc adversary");
  attack->add_flag("--json", attack_args.json, "machine-readable output");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "security and key-storage report for a crossbar config");
  report_args.geo.add(report);
  report->add_option("--out", report_args.out, "also write the JSON report here");
  report->add_flag("--json", report_args.json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*map) return cmd_map(map_args);
    if (*infer) return cmd_infer(infer_args);
    if (*attack) return cmd_attack(attack_args);
    if (*report) return cmd_report(report_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
