#include "xbarsec/report.hpp"

#include <bit>
#include <iomanip>
#include <sstream>

#include "xbarsec/error.hpp"

namespace xbarsec {

const char* to_string(Method m) {
  switch (m) {
    case Method::kOur: return "our";
    case Method::kDate20: return "date20";
    case Method::kAsp21: return "asp21";
    case Method::kSram20: return "sram20";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  if (s == "our") return Method::kOur;
  if (s == "date20") return Method::kDate20;
  if (s == "asp21") return Method::kAsp21;
  if (s == "sram20") return Method::kSram20;
  throw ValidationError("unknown protection method '" + s + "' (our|date20|asp21|sram20)");
}

namespace {

// ceil(log2(v)) for v >= 1: address bits needed to select one of v inputs.
std::size_t select_bits(std::size_t v) { return v <= 1 ? 0 : std::bit_width(v - 1); }

struct ReportedRow {
  Method method;
  std::optional<double> area1, power1, key1, area2, power2, key2;
};

// Normalized area / power / key-storage, relative to "our". Not simulated.
const ReportedRow kReportedTable[] = {
    {Method::kOur, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0},
    {Method::kDate20, std::nullopt, std::nullopt, std::nullopt, 64.80, 64.80, 1.43},
    {Method::kAsp21, 18.00, 18.00, 1.02, 43.20, 43.20, 1.02},
    {Method::kSram20, 6417.29, 408.19, 0.96, 3439.05, 979.65, 0.96},
};

}  // namespace

std::size_t security_bits(const CrossbarConfig& config) {
  config.validate();
  return config.blocks() * config.data_cols();
}

std::size_t unpadded_security_bits(std::size_t rows, std::size_t cols, std::size_t block_rows) {
  require(block_rows > 0, "block height must be positive");
  return cols * ((rows + block_rows - 1) / block_rows);
}

std::size_t padding_mask_bits(const CrossbarConfig& config) {
  return config.rows + config.data_cols();
}

std::optional<std::size_t> key_storage_bits(Method method, const CrossbarConfig& config,
                                            bool include_padding_masks, int io_bits) {
  config.validate();
  const std::size_t m = config.rows;
  const std::size_t wl = config.wl_active;
  switch (method) {
    case Method::kOur:
      return security_bits(config) + (include_padding_masks ? padding_mask_bits(config) : 0);
    case Method::kDate20:
      // 32 16:1 MUXes + 16 1:16 DEMUXes for every group of wl_active rows;
      // only defined on positive/negative crossbar pairs.
      if (config.scheme != Scheme::kDifferential) return std::nullopt;
      return 48 * select_bits(wl) * (m / wl);
    case Method::kAsp21:
      return m * static_cast<std::size_t>(io_bits) + select_bits(wl) * 2 * (m / wl);
    case Method::kSram20:
      return m * select_bits(m);
  }
  throw ValidationError("unknown protection method");
}

std::vector<OverheadSpec> overhead_table(const CrossbarConfig& config) {
  const auto ours = key_storage_bits(Method::kOur, config);
  std::vector<OverheadSpec> rows;
  const bool s1 = config.scheme == Scheme::kBiased;
  for (const auto& p : kReportedTable) {
    OverheadSpec o{p.method, config.scheme, key_storage_bits(p.method, config), std::nullopt,
                   s1 ? p.key1 : p.key2, s1 ? p.area1 : p.area2, s1 ? p.power1 : p.power2};
    if (o.key_bits && ours && *ours > 0) {
      o.key_ratio = static_cast<double>(*o.key_bits) / static_cast<double>(*ours);
    }
    rows.push_back(o);
  }
  return rows;
}

namespace {

std::string opt_num(const std::optional<double>& v, int prec) {
  if (!v) return "--";
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << *v;
  return os.str();
}

}  // namespace

std::string format_report(const CrossbarConfig& config) {
  config.validate();
  std::ostringstream os;
  const int scheme = static_cast<int>(config.scheme);
  os << "crossbar " << config.rows << "x" << config.cols << ", p_m=" << config.device_bits
     << ", G=" << config.groups << ", wl_active=" << config.wl_active
     << ", x=" << config.block_rows << ", k=" << config.blocks() << ", scheme " << scheme
     << (config.sum_column ? " (last column = sum of inputs, not keyable)" : "") << "\n";
  os << "security per crossbar" << (scheme == 2 ? " pair" : "") << ": 2^" << security_bits(config)
     << "  (k x keyable columns = " << config.blocks() << " x " << config.data_cols() << ")\n";
  os << "padding masks per padded tile: " << padding_mask_bits(config) << " bits\n\n";

  os << std::left << std::setw(8) << "method" << std::right << std::setw(12) << "key bits"
     << std::setw(10) << "ratio" << std::setw(14) << "rep. ratio" << std::setw(14)
     << "rep. area" << std::setw(14) << "rep. power" << "\n";
  for (const auto& o : overhead_table(config)) {
    os << std::left << std::setw(8) << to_string(o.method) << std::right << std::setw(12)
       << (o.key_bits ? std::to_string(*o.key_bits) : "--") << std::setw(10)
       << opt_num(o.key_ratio, 2) << std::setw(14) << opt_num(o.reported_key_ratio, 2)
       << std::setw(14) << opt_num(o.reported_area_ratio, 2) << std::setw(14)
       << opt_num(o.reported_power_ratio, 2) << "\n";
  }
  os << "\nkey bits are computed per protection module with keys shared inside a PE;\n"
        "rep. columns are published normalized overheads (literature-reported, not simulated).\n";
  return os.str();
}

nlohmann::json report_json(const CrossbarConfig& config) {
  nlohmann::json j;
  j["scheme"] = static_cast<int>(config.scheme);
  j["rows"] = config.rows;
  j["cols"] = config.cols;
  j["block_rows"] = config.block_rows;
  j["blocks"] = config.blocks();
  j["keyable_cols"] = config.data_cols();
  j["security_bits"] = security_bits(config);
  j["padding_mask_bits"] = padding_mask_bits(config);
  auto& rows = j["methods"] = nlohmann::json::array();
  for (const auto& o : overhead_table(config)) {
    nlohmann::json r;
    r["method"] = to_string(o.method);
    r["key_bits"] = o.key_bits ? nlohmann::json(*o.key_bits) : nlohmann::json();
    r["key_ratio"] = o.key_ratio ? nlohmann::json(*o.key_ratio) : nlohmann::json();
    r["reported_key_ratio"] = o.reported_key_ratio ? nlohmann::json(*o.reported_key_ratio) : nlohmann::json();
    r["reported_area_ratio"] = o.reported_area_ratio ? nlohmann::json(*o.reported_area_ratio) : nlohmann::json();
    r["reported_power_ratio"] =
        o.reported_power_ratio ? nlohmann::json(*o.reported_power_ratio) : nlohmann::json();
    r["reported_values_simulated"] = false;
    rows.push_back(r);
  }
  return j;
}

}  // namespace xbarsec
