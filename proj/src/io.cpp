#include "xbarsec/io.hpp"

#include <sodium.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "xbarsec/error.hpp"

namespace xbarsec::io {

namespace {

constexpr int kB64 = sodium_base64_VARIANT_ORIGINAL;

template <typename T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

void expect_format(const json& j, const char* format) {
  require(j.is_object() && j.value("format", std::string{}) == format,
          std::string("not a ") + format + " document");
}

template <typename Word>
std::string encode_words(std::span<const Word> words) {
  std::vector<std::uint8_t> bytes(words.size() * sizeof(Word));
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto u = static_cast<std::make_unsigned_t<Word>>(words[i]);
    for (std::size_t b = 0; b < sizeof(Word); ++b) bytes[i * sizeof(Word) + b] = static_cast<std::uint8_t>(u >> (8 * b));
  }
  return base64_encode(bytes);
}

template <typename Word>
std::vector<Word> decode_words(const std::string& text, std::size_t count) {
  const auto bytes = base64_decode(text);
  require(bytes.size() == count * sizeof(Word), "payload length does not match the declared size");
  std::vector<Word> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::make_unsigned_t<Word> u = 0;
    for (std::size_t b = 0; b < sizeof(Word); ++b)
      u |= static_cast<std::make_unsigned_t<Word>>(static_cast<std::make_unsigned_t<Word>>(bytes[i * sizeof(Word) + b]) << (8 * b));
    out[i] = static_cast<Word>(u);
  }
  return out;
}

const char* kind_name(LayerKind k) { return k == LayerKind::kConv ? "conv" : "fc"; }

LayerKind kind_from(const std::string& s) {
  if (s == "fc") return LayerKind::kFC;
  if (s == "conv") return LayerKind::kConv;
  throw ValidationError("unknown layer kind '" + s + "'");
}

json mask_json(const std::vector<std::uint8_t>& mask) {
  if (mask.empty()) return nullptr;
  return json{{"bits", mask.size()}, {"data", base64_encode(pack_bits(mask))}};
}

std::vector<std::uint8_t> mask_from(const json& j) {
  if (j.is_null()) return {};
  const auto n = get<std::size_t>(j, "bits");
  return unpack_bits(base64_decode(get<std::string>(j, "data")), n);
}

json level_json(const LevelMatrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols},
              {"cells", encode_words<std::uint16_t>(m.cells)}};
}

LevelMatrix level_from(const json& j) {
  LevelMatrix m;
  m.rows = get<std::size_t>(j, "rows");
  m.cols = get<std::size_t>(j, "cols");
  m.cells = decode_words<std::uint16_t>(get<std::string>(j, "cells"), m.rows * m.cols);
  return m;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(sodium_base64_encoded_len(bytes.size(), kB64), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), kB64);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end, kB64) != 0 ||
      end != text.data() + text.size())
    throw ValidationError("invalid base64 payload");
  out.resize(len);
  return out;
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count) {
  require(packed.size() == (count + 7) / 8, "bitset length does not match its bit count");
  std::vector<std::uint8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(1) + "\n"); }

json to_json(const CrossbarConfig& c) {
  return json{{"rows", c.rows},
              {"cols", c.cols},
              {"device_bits", c.device_bits},
              {"groups", c.groups},
              {"wl_active", c.wl_active},
              {"block_rows", c.block_rows},
              {"adc_per_group", c.adc_per_group},
              {"scheme", static_cast<int>(c.scheme)},
              {"sum_column", c.sum_column},
              {"input_bits", c.input_bits},
              {"pad_small", c.pad_small}};
}

CrossbarConfig config_from_json(const json& j) {
  CrossbarConfig c;
  c.rows = get<std::size_t>(j, "rows");
  c.cols = get<std::size_t>(j, "cols");
  c.device_bits = get<int>(j, "device_bits");
  c.groups = get<int>(j, "groups");
  c.wl_active = get<std::size_t>(j, "wl_active");
  c.block_rows = get<std::size_t>(j, "block_rows");
  c.adc_per_group = get<int>(j, "adc_per_group");
  const int s = get<int>(j, "scheme");
  require(s == 1 || s == 2, "scheme must be 1 or 2");
  c.scheme = static_cast<Scheme>(s);
  c.sum_column = get<bool>(j, "sum_column");
  c.input_bits = get<int>(j, "input_bits");
  c.pad_small = get<bool>(j, "pad_small");
  c.validate();
  return c;
}

json to_json(const QuantTensor& t) {
  return json{{"format", "xbarsec.tensor"},
              {"shape", t.shape()},
              {"bits", t.bits()},
              {"signed", t.is_signed()},
              {"scale", t.scale()},
              {"data", encode_words<std::int32_t>(t.data())}};
}

QuantTensor tensor_from_json(const json& j) {
  expect_format(j, "xbarsec.tensor");
  const auto shape = get<Shape>(j, "shape");
  auto data = decode_words<std::int32_t>(get<std::string>(j, "data"), shape_numel(shape));
  return QuantTensor(shape, std::move(data), get<int>(j, "bits"), get<bool>(j, "signed"),
                     get<double>(j, "scale"));
}

void save_tensor(const fs::path& path, const QuantTensor& t) { write_json(path, to_json(t)); }
QuantTensor load_tensor(const fs::path& path) { return tensor_from_json(read_json(path)); }

json to_json(const LayerGeometry& g) {
  return json{{"kind", kind_name(g.kind)},
              {"in_dims", g.in_dims},
              {"out_dims", g.out_dims},
              {"kernel_h", g.kernel_h},
              {"kernel_w", g.kernel_w},
              {"stride", g.stride},
              {"padding", g.padding},
              {"weight_shape", g.weight_shape},
              {"weight_bits", g.weight_bits},
              {"activation", g.activation.kind == Activation::Kind::kRelu ? "relu" : "none"},
              {"shift", g.activation.shift}};
}

LayerGeometry geometry_from_json(const json& j) {
  LayerGeometry g;
  g.kind = kind_from(get<std::string>(j, "kind"));
  g.in_dims = get<Shape>(j, "in_dims");
  g.out_dims = get<Shape>(j, "out_dims");
  g.kernel_h = get<std::size_t>(j, "kernel_h");
  g.kernel_w = get<std::size_t>(j, "kernel_w");
  g.stride = get<std::size_t>(j, "stride");
  g.padding = get<std::size_t>(j, "padding");
  g.weight_shape = get<Shape>(j, "weight_shape");
  g.weight_bits = get<int>(j, "weight_bits");
  const auto act = get<std::string>(j, "activation");
  require(act == "relu" || act == "none", "unknown activation '" + act + "'");
  g.activation.kind = act == "relu" ? Activation::Kind::kRelu : Activation::Kind::kNone;
  g.activation.shift = get<int>(j, "shift");
  g.validate();
  return g;
}

void save_model(const fs::path& path, const NetworkModel& model) {
  model.validate();
  json layers = json::array();
  const std::string stem = path.stem().string();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const std::string file = stem + ".layer" + std::to_string(i) + ".json";
    save_tensor(path.parent_path() / file, model.layers[i].weight);
    json l = to_json(static_cast<const LayerGeometry&>(model.layers[i]));
    l["weight"] = file;
    layers.push_back(std::move(l));
  }
  write_json(path, json{{"format", "xbarsec.model"},
                        {"input_shape", model.input_shape},
                        {"input_bits", model.input_bits},
                        {"num_classes", model.num_classes},
                        {"layers", std::move(layers)}});
}

NetworkModel load_model(const fs::path& path) {
  const json j = read_json(path);
  expect_format(j, "xbarsec.model");
  NetworkModel m;
  m.input_shape = get<Shape>(j, "input_shape");
  m.input_bits = get<int>(j, "input_bits");
  m.num_classes = get<std::size_t>(j, "num_classes");
  for (const auto& l : get<json>(j, "layers")) {
    const LayerGeometry g = geometry_from_json(l);
    const json& w = l.at("weight");
    QuantTensor t = w.is_string() ? load_tensor(path.parent_path() / w.get<std::string>())
                                  : tensor_from_json(w);
    require(t.shape() == g.weight_shape, "weight tensor shape does not match the layer");
    LayerSpec spec = with_weight(g, std::move(t));
    m.layers.push_back(std::move(spec));
  }
  m.validate();
  return m;
}

json to_json(const Dataset& d) {
  return json{{"format", "xbarsec.dataset"},
              {"input_shape", d.input_shape},
              {"bits", d.bits},
              {"num_classes", d.num_classes},
              {"inputs", d.inputs},
              {"labels", d.labels}};
}

Dataset dataset_from_json(const json& j) {
  expect_format(j, "xbarsec.dataset");
  Dataset d;
  d.input_shape = get<Shape>(j, "input_shape");
  d.bits = get<int>(j, "bits");
  d.num_classes = get<std::size_t>(j, "num_classes");
  d.inputs = get<std::vector<std::vector<std::int32_t>>>(j, "inputs");
  d.labels = get<std::vector<int>>(j, "labels");
  d.validate();
  return d;
}

void save_dataset(const fs::path& path, const Dataset& d) { write_json(path, to_json(d)); }
Dataset load_dataset(const fs::path& path) { return dataset_from_json(read_json(path)); }

json to_json(const KeyStore& k) {
  json layers = json::array();
  for (const auto& l : k.layers) {
    json tiles = json::array();
    for (const auto& t : l.tiles) {
      tiles.push_back(json{{"blocks", t.blocks},
                           {"cols", t.cols},
                           {"transform_bits", base64_encode(pack_bits(t.transform))},
                           {"row_mask", mask_json(t.row_mask)},
                           {"col_mask", mask_json(t.col_mask)}});
    }
    layers.push_back(json{{"protect", l.protect}, {"tiles", std::move(tiles)}});
  }
  return json{{"format", "xbarsec.keys"},
              {"scheme", static_cast<int>(k.config.scheme)},
              {"config", to_json(k.config)},
              {"seed", k.seed},
              {"layers", std::move(layers)}};
}

KeyStore keys_from_json(const json& j) {
  expect_format(j, "xbarsec.keys");
  KeyStore k;
  k.config = config_from_json(get<json>(j, "config"));
  require(get<int>(j, "scheme") == static_cast<int>(k.config.scheme), "key file scheme disagrees with its config");
  k.seed = get<std::uint64_t>(j, "seed");
  for (const auto& l : get<json>(j, "layers")) {
    LayerKeys lk;
    lk.protect = get<bool>(l, "protect");
    for (const auto& t : get<json>(l, "tiles")) {
      TileKey tk;
      tk.blocks = get<std::size_t>(t, "blocks");
      tk.cols = get<std::size_t>(t, "cols");
      require(tk.blocks == k.config.blocks() && tk.cols == k.config.data_cols(),
              "tile key size disagrees with the crossbar config");
      tk.transform = unpack_bits(base64_decode(get<std::string>(t, "transform_bits")), tk.blocks * tk.cols);
      tk.row_mask = mask_from(t.at("row_mask"));
      tk.col_mask = mask_from(t.at("col_mask"));
      require(tk.row_mask.empty() == tk.col_mask.empty(), "tile key has only one of its two masks");
      require(tk.row_mask.empty() || (tk.row_mask.size() == k.config.rows && tk.col_mask.size() == k.config.data_cols()),
              "mask length disagrees with the crossbar config");
      lk.tiles.push_back(std::move(tk));
    }
    k.layers.push_back(std::move(lk));
  }
  return k;
}

void save_keys(const fs::path& path, const KeyStore& k) { write_json(path, to_json(k)); }
KeyStore load_keys(const fs::path& path) { return keys_from_json(read_json(path)); }

json tile_to_json(const MappedTile& tile, const CrossbarConfig& config) {
  json groups = json::array();
  for (const auto& g : tile.groups) {
    groups.push_back(json{{"pos", level_json(g.pos())},
                          {"neg", g.is_pair() ? level_json(g.neg()) : json(nullptr)}});
  }
  return json{{"format", "xbarsec.tile"}, {"config", to_json(config)}, {"groups", std::move(groups)}};
}

std::vector<CrossbarTile> tile_groups_from_json(const json& j, const CrossbarConfig& config) {
  expect_format(j, "xbarsec.tile");
  require(config_from_json(get<json>(j, "config")) == config, "tile dump was taken under a different config");
  std::vector<CrossbarTile> out;
  for (const auto& g : get<json>(j, "groups")) {
    LevelMatrix pos = level_from(g.at("pos"));
    std::optional<LevelMatrix> neg;
    if (!g.at("neg").is_null()) neg = level_from(g.at("neg"));
    require(pos.rows == config.rows && pos.cols == config.cols, "tile dump dimensions disagree with the config");
    out.emplace_back(std::move(pos), std::move(neg), config);
  }
  require(out.size() == static_cast<std::size_t>(config.groups), "tile dump has the wrong number of groups");
  return out;
}

void save_mapped(const fs::path& dir, const MappedModel& mapped) {
  json layers = json::array();
  for (std::size_t l = 0; l < mapped.layers.size(); ++l) {
    const auto& layer = mapped.layers[l];
    json tiles = json::array();
    for (std::size_t t = 0; t < layer.tiles.size(); ++t) {
      const auto& tile = layer.tiles[t];
      const std::string file = "tiles/L" + std::to_string(l) + "_T" + std::to_string(t) + ".json";
      write_json(dir / file, tile_to_json(tile, mapped.config));
      const auto& g = tile.geom;
      tiles.push_back(json{{"row_tile", g.row_tile}, {"col_tile", g.col_tile}, {"row0", g.row0},
                           {"col0", g.col0}, {"rows", g.rows}, {"cols", g.cols},
                           {"padded", g.padded}, {"file", file}});
    }
    layers.push_back(json{{"geometry", to_json(layer.geom)},
                          {"protect", layer.protect},
                          {"row_tiles", layer.row_tiles},
                          {"col_tiles", layer.col_tiles},
                          {"bias_offset", layer.bias_offset},
                          {"tiles", std::move(tiles)}});
  }
  write_json(dir / "mapped.json", json{{"format", "xbarsec.mapped"},
                                       {"config", to_json(mapped.config)},
                                       {"layers", std::move(layers)}});
}

MappedModel load_mapped(const fs::path& dir) {
  const json j = read_json(dir / "mapped.json");
  expect_format(j, "xbarsec.mapped");
  MappedModel m;
  m.config = config_from_json(get<json>(j, "config"));
  for (const auto& l : get<json>(j, "layers")) {
    MappedLayer layer;
    layer.geom = geometry_from_json(get<json>(l, "geometry"));
    layer.protect = get<bool>(l, "protect");
    layer.row_tiles = get<std::size_t>(l, "row_tiles");
    layer.col_tiles = get<std::size_t>(l, "col_tiles");
    layer.bias_offset = get<std::int64_t>(l, "bias_offset");
    const auto plan = plan_tiles({layer.geom.vmm_rows(), layer.geom.vmm_cols(), layer.protect}, m.config);
    const auto& tiles = get<json>(l, "tiles");
    require(tiles.size() == plan.size() && plan.size() == layer.row_tiles * layer.col_tiles,
            "tile list disagrees with the layer geometry");
    for (std::size_t t = 0; t < plan.size(); ++t) {
      const auto& tj = tiles[t];
      MappedTile tile;
      tile.geom.row_tile = get<std::size_t>(tj, "row_tile");
      tile.geom.col_tile = get<std::size_t>(tj, "col_tile");
      tile.geom.row0 = get<std::size_t>(tj, "row0");
      tile.geom.col0 = get<std::size_t>(tj, "col0");
      tile.geom.rows = get<std::size_t>(tj, "rows");
      tile.geom.cols = get<std::size_t>(tj, "cols");
      tile.geom.padded = get<bool>(tj, "padded");
      require(tile.geom == plan[t], "tile geometry disagrees with the tiling of the layer");
      tile.groups = tile_groups_from_json(read_json(dir / get<std::string>(tj, "file")), m.config);
      layer.tiles.push_back(std::move(tile));
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

std::string attack_csv(const AttackReport& r) {
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  if (r.kind == AttackKind::kDivideAndConquer) {
    out << "layer,tile,block,col,correct_bit,acc_bit0,acc_bit1,gap,threshold,distinguishable\n";
    for (const auto& d : r.dnc) {
      out << d.target.layer << ',' << d.target.tile << ',' << d.target.block << ',' << d.target.col << ','
          << int(d.correct_bit) << ',' << num(d.acc_bit0) << ',' << num(d.acc_bit1) << ',' << num(d.gap)
          << ',' << num(d.threshold) << ',' << int(d.distinguishable) << '\n';
    }
  } else {
    out << "label,trial,accuracy\n";
    for (std::size_t t = 0; t < r.trial_accuracy.size(); ++t)
      out << r.label << ',' << t << ',' << num(r.trial_accuracy[t]) << '\n';
  }
  return out.str();
}

json to_json(const AttackReport& r) {
  json j{{"kind", to_string(r.kind)},
         {"label", r.label},
         {"num_classes", r.num_classes},
         {"samples", r.samples},
         {"baseline_accuracy", r.baseline_accuracy},
         {"chance", r.chance()},
         {"trials", r.trials()}};
  if (r.kind == AttackKind::kDivideAndConquer) {
    j["distinguishable_fraction"] = r.distinguishable_fraction();
  } else {
    j["mean"] = r.mean();
    j["stddev"] = r.stddev();
  }
  return j;
}

}  // namespace xbarsec::io
