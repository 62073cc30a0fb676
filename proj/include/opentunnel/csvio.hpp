#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "opentunnel/errors.hpp"

namespace opentunnel {

/// FNV-1a 64-bit; stable fingerprint of the canonical config text, quoted in
/// every CSV so artifacts can be traced to the manifest that produced them.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_string(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// CSV emitter: one manifest-hash comment line, one header line naming the
/// columns (all quantities dimensionless), then %.12g rows.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& manifest_hash,
            const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw config_error("cannot open " + path.string() + " for writing");
    out_ << "# manifest " << manifest_hash << " (all columns dimensionless)\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
      out_ << (i ? "," : "") << columns[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    char buf[40];
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.12g", values[i]);
      out_ << (i ? "," : "") << buf;
    }
    out_ << "\n";
  }

  // mixed row for tables carrying a label column
  void row(const std::string& label, const std::vector<double>& values) {
    out_ << label;
    char buf[40];
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), "%.12g", v);
      out_ << "," << buf;
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace opentunnel
