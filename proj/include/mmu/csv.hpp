#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace mmu {

/// Shortest round-trip decimal form of v (std::to_chars); parsing it back
/// recovers the exact double, which keeps staged and fused pipeline runs
/// byte-identical.
std::string format_double(double v);

/// Strict double parser (whole token must consume); context goes into the
/// error message. Rejects non-finite values when require_finite is set.
double parse_double(const std::string& token, const std::string& context,
                    bool require_finite = true);

long parse_long(const std::string& token, const std::string& context);

class CsvWriter {
public:
    CsvWriter(const std::string& path, std::span<const std::string> header);
    void row(std::span<const std::string> cells);
    void close();

private:
    std::ofstream out_;
    std::string path_;
    std::size_t cols_ = 0;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by header name; throws if absent.
    std::size_t col(const std::string& name) const;
};

/// Reads a whole CSV file; ragged rows are a line-numbered error.
CsvTable read_csv(const std::string& path);

}  // namespace mmu
