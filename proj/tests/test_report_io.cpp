#include <doctest.h>

#include <filesystem>

#include "support.hpp"
#include "xbarsec/error.hpp"
#include "xbarsec/io.hpp"
#include "xbarsec/report.hpp"

using namespace xbarsec;
using namespace xbarsec::test;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("xbarsec_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("security bits: k blocks times keyable columns") {
  auto c = CrossbarConfig::evaluation_default(Scheme::kBiased);
  CHECK(security_bits(c) == 8 * 255);
  c = CrossbarConfig::evaluation_default(Scheme::kDifferential);
  CHECK(security_bits(c) == 8 * 256);
  CHECK(unpadded_security_bits(32, 32, 8) == 128);
  CHECK(unpadded_security_bits(33, 10, 8) == 50);
  CHECK(padding_mask_bits(c) == 256 + 256);
}

TEST_CASE("key-storage formulas at 256 rows, 16 active word lines, 8-bit inputs") {
  const auto c2 = CrossbarConfig::evaluation_default(Scheme::kDifferential);
  CHECK(key_storage_bits(Method::kDate20, c2) == std::optional<std::size_t>(48 * 4 * 16));
  CHECK(key_storage_bits(Method::kAsp21, c2) == std::optional<std::size_t>(256 * 8 + 4 * 2 * 16));
  CHECK(key_storage_bits(Method::kSram20, c2) == std::optional<std::size_t>(256 * 8));
  CHECK(key_storage_bits(Method::kOur, c2) == std::optional<std::size_t>(2048));
  CHECK(key_storage_bits(Method::kOur, c2, true) == std::optional<std::size_t>(2048 + 512));
  const auto c1 = CrossbarConfig::evaluation_default(Scheme::kBiased);
  CHECK_FALSE(key_storage_bits(Method::kDate20, c1).has_value());
}

TEST_CASE("overhead table and method names") {
  const auto rows = overhead_table(CrossbarConfig::evaluation_default(Scheme::kDifferential));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].key_ratio == std::optional<double>(1.0));
  CHECK(rows[1].reported_key_ratio == std::optional<double>(1.43));
  CHECK(*rows[1].key_ratio == doctest::Approx(1.5));
  for (auto m : {Method::kOur, Method::kDate20, Method::kAsp21, Method::kSram20})
    CHECK(method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(method_from_string("rot13"), ValidationError);
  const auto text = format_report(CrossbarConfig::evaluation_default(Scheme::kBiased));
  CHECK(text.find("2^2040") != std::string::npos);
  const auto j = report_json(CrossbarConfig::evaluation_default(Scheme::kBiased));
  CHECK(j.at("security_bits") == 2040);
  CHECK(j.at("methods").at(1).at("key_bits").is_null());
}

}

TEST_SUITE("io") {

TEST_CASE("base64 against the RFC 4648 vectors") {
  const std::vector<std::pair<std::string, std::string>> v{
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, enc] : v) {
    const std::vector<std::uint8_t> bytes(plain.begin(), plain.end());
    CHECK(io::base64_encode(bytes) == enc);
    CHECK(io::base64_decode(enc) == bytes);
  }
  CHECK_THROWS_AS(io::base64_decode("Zm9v!"), ValidationError);
}

TEST_CASE("bit packing round-trips") {
  Rng rng(2);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 255u, 2040u}) {
    std::vector<std::uint8_t> bits(n);
    for (auto& b : bits) b = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));
    CHECK(io::unpack_bits(io::pack_bits(bits), n) == bits);
  }
  const std::vector<std::uint8_t> b{1, 0, 0, 0, 0, 0, 0, 1, 1};
  CHECK(io::pack_bits(b) == std::vector<std::uint8_t>{0x81, 0x01});
}

TEST_CASE("tensor files round-trip bit-exactly, including extreme values") {
  const auto dir = scratch("tensor");
  const QuantTensor t({2, 3}, {-32768, 32767, 0, -1, 1, 12345}, 16, true, 0.0123456789);
  io::save_tensor(dir / "t.json", t);
  const auto back = io::load_tensor(dir / "t.json");
  CHECK(back == t);
  CHECK(back.scale() == t.scale());
  CHECK(back.shape() == t.shape());
  // Little-endian int32 payload: -32768 is 00 80 ff ff.
  const auto j = io::read_json(dir / "t.json");
  CHECK(io::base64_decode(j.at("data").get<std::string>())[0] == 0x00);
  CHECK(io::base64_decode(j.at("data").get<std::string>())[1] == 0x80);
  CHECK(io::base64_decode(j.at("data").get<std::string>())[3] == 0xff);
}

TEST_CASE("model, dataset and key files round-trip") {
  const auto dir = scratch("model");
  const auto model = io::load_model(data_dir() / "cnn.json");
  io::save_model(dir / "m.json", model);
  const auto back = io::load_model(dir / "m.json");
  REQUIRE(back.layers.size() == model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    CHECK(static_cast<const LayerGeometry&>(back.layers[l]) == static_cast<const LayerGeometry&>(model.layers[l]));
    CHECK(back.layers[l].weight == model.layers[l].weight);
  }
  const auto data = io::load_dataset(data_dir() / "digits_test.json");
  CHECK(data.size() == 600);
  io::save_dataset(dir / "d.json", data);
  const auto d2 = io::load_dataset(dir / "d.json");
  CHECK(d2.inputs == data.inputs);
  CHECK(d2.labels == data.labels);

  const auto config = CrossbarConfig::evaluation_default(Scheme::kDifferential);
  const auto keys = generate_keys(config, plans_of(model.layers), 5);
  io::save_keys(dir / "k.json", keys);
  CHECK(io::load_keys(dir / "k.json") == keys);
}

TEST_CASE("mapped model round-trips and stays usable") {
  const auto dir = scratch("mapped");
  const auto model = io::load_model(data_dir() / "mlp.json");
  const auto config = CrossbarConfig::evaluation_default(Scheme::kBiased);
  const auto keys = generate_keys(config, plans_of(model.layers), 5);
  const auto mapped = map_model(model.layers, config, keys);
  io::save_mapped(dir, mapped);
  const auto back = io::load_mapped(dir);
  REQUIRE(back.layers.size() == mapped.layers.size());
  for (std::size_t l = 0; l < back.layers.size(); ++l) {
    CHECK(back.layers[l].geom == mapped.layers[l].geom);
    CHECK(back.layers[l].bias_offset == mapped.layers[l].bias_offset);
    REQUIRE(back.layers[l].tiles.size() == mapped.layers[l].tiles.size());
    for (std::size_t t = 0; t < back.layers[l].tiles.size(); ++t) {
      CHECK(back.layers[l].tiles[t].geom == mapped.layers[l].tiles[t].geom);
      CHECK(back.layers[l].tiles[t].groups == mapped.layers[l].tiles[t].groups);
    }
  }
  const std::vector<std::int32_t> x(64, 100);
  CHECK(infer_mapped(back, keys, x) == infer_reference(model, x));
  // The manifest names no physical positions.
  const auto text = io::read_text(dir / "mapped.json");
  CHECK(text.find("mask") == std::string::npos);
  CHECK(text.find("_pos") == std::string::npos);
}

TEST_CASE("malformed and missing artifacts give typed errors") {
  const auto dir = scratch("bad");
  CHECK_THROWS_AS(io::load_tensor(dir / "missing.json"), IoError);
  io::write_text_atomic(dir / "junk.json", "{not json");
  CHECK_THROWS_AS(io::load_tensor(dir / "junk.json"), ValidationError);
  io::write_text_atomic(dir / "wrong.json", R"({"format": "xbarsec.dataset"})");
  CHECK_THROWS_AS(io::load_tensor(dir / "wrong.json"), ValidationError);
  io::write_text_atomic(dir / "short.json",
                        R"({"format": "xbarsec.tensor", "shape": [3], "bits": 8, "signed": true, "scale": 1, "data": "AAAAAA=="})");
  CHECK_THROWS_AS(io::load_tensor(dir / "short.json"), ValidationError);
  io::write_text_atomic(dir / "empty.json",
                        R"({"format": "xbarsec.dataset", "input_shape": [2], "bits": 8, "num_classes": 2, "inputs": [], "labels": []})");
  CHECK_THROWS_AS(io::load_dataset(dir / "empty.json"), ValidationError);
  CHECK_FALSE(fs::exists(dir / "junk.json.tmp"));
}

}
