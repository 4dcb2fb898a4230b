#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace ugcp {

// FNV-1a over the canonical (key-sorted) JSON dump; stable under field
// reordering in the source document.
std::uint64_t fnv1a64(const std::string& s);
std::string hash_hex(std::uint64_t h);

std::string format17(double v);

// Minimal RFC-4180-style CSV writer (LF endings). The first line is a
// `# config_hash=...` comment so every output embeds its provenance;
// readers that reject comments can skip the first line.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& config_hash,
              const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    static std::string cell(double v) { return format17(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }

private:
    std::ofstream out_;
    void line(const std::vector<std::string>& cells);
};

}  // namespace ugcp
