#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xbarsec/adversary.hpp"
#include "xbarsec/crossbar.hpp"
#include "xbarsec/nn.hpp"
#include "xbarsec/secure_map.hpp"
#include "xbarsec/tensor.hpp"

// On-disk artifacts. Everything is JSON with sorted keys so equal inputs
// give byte-identical files; bulk arrays are base64 of little-endian words.
namespace xbarsec::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// LSB-first bit packing of 0/1 bytes.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count);

std::string read_text(const fs::path& path);
// Writes to a sibling temp file, then renames over the target.
void write_text_atomic(const fs::path& path, std::string_view text);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

json to_json(const CrossbarConfig& c);
CrossbarConfig config_from_json(const json& j);

json to_json(const QuantTensor& t);
QuantTensor tensor_from_json(const json& j);
void save_tensor(const fs::path& path, const QuantTensor& t);
QuantTensor load_tensor(const fs::path& path);

json to_json(const LayerGeometry& g);
LayerGeometry geometry_from_json(const json& j);

// Model manifest; weights go to "<stem>.layer<i>.json" next to it.
void save_model(const fs::path& path, const NetworkModel& model);
NetworkModel load_model(const fs::path& path);

json to_json(const Dataset& d);
Dataset dataset_from_json(const json& j);
void save_dataset(const fs::path& path, const Dataset& d);
Dataset load_dataset(const fs::path& path);

json to_json(const KeyStore& k);
KeyStore keys_from_json(const json& j);
void save_keys(const fs::path& path, const KeyStore& k);
KeyStore load_keys(const fs::path& path);

// A tile dump holds what a probe of the crossbars would read: config and
// the conductance levels of every group.
json tile_to_json(const MappedTile& tile, const CrossbarConfig& config);
std::vector<CrossbarTile> tile_groups_from_json(const json& j, const CrossbarConfig& config);

// dir/mapped.json plus dir/tiles/L<l>_T<t>.json. Nothing secret is written:
// mask positions of padded tiles stay in the key file.
void save_mapped(const fs::path& dir, const MappedModel& mapped);
MappedModel load_mapped(const fs::path& dir);

std::string attack_csv(const AttackReport& r);
json to_json(const AttackReport& r);

}  // namespace xbarsec::io
