#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xbarsec/crossbar.hpp"

namespace xbarsec {

enum class Method { kOur, kDate20, kAsp21, kSram20 };
const char* to_string(Method m);
Method method_from_string(const std::string& s);

// log2 of the brute-force trial count for one crossbar (pair):
// k x (keyable columns), i.e. k(N-1) with a sum column and kN without.
std::size_t security_bits(const CrossbarConfig& config);

// Same count for a small (rows x cols) matrix mapped without padding:
// cols x ceil(rows / x).
std::size_t unpadded_security_bits(std::size_t rows, std::size_t cols, std::size_t block_rows);

// M + data-column mask bits a padded tile adds.
std::size_t padding_mask_bits(const CrossbarConfig& config);

// Key storage for one protection module, keys shared inside the PE.
//   our:    k x keyable columns (one bit per block x column, shared by the G groups)
//   date20: 48 MUX/DEMUX x log2(wl_active) bits x (M / wl_active) row segments
//   asp21:  M x io_bits row activation vectors + log2(vou) x 2 x (M / vou), vou = wl_active
//   sram20: M x log2(M) bits locating the "1" of every SRAM row
// Returns nullopt where a method does not apply (date20 on scheme 1).
std::optional<std::size_t> key_storage_bits(Method method, const CrossbarConfig& config,
                                            bool include_padding_masks = false,
                                            int io_bits = 8);

struct OverheadSpec {
  Method method;
  Scheme scheme;
  std::optional<std::size_t> key_bits;
  std::optional<double> key_ratio;        // key_bits / our key_bits
  std::optional<double> reported_key_ratio;  // published normalized value, not simulated
  std::optional<double> reported_area_ratio;
  std::optional<double> reported_power_ratio;
};

std::vector<OverheadSpec> overhead_table(const CrossbarConfig& config);

// Human-readable security and key-storage report for one config.
std::string format_report(const CrossbarConfig& config);
nlohmann::json report_json(const CrossbarConfig& config);

}  // namespace xbarsec
