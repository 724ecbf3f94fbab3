#include "mmu/csv.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "mmu/errors.hpp"

namespace mmu {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& token, const std::string& context,
                    bool require_finite) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        fail(context + ": not a number: '" + token + "'");
    if (require_finite && !std::isfinite(v))
        fail(context + ": non-finite value: '" + token + "'");
    return v;
}

long parse_long(const std::string& token, const std::string& context) {
    long v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
        fail(context + ": not an integer: '" + token + "'");
    return v;
}

CsvWriter::CsvWriter(const std::string& path, std::span<const std::string> header)
    : out_(path, std::ios::binary), path_(path), cols_(header.size()) {
    if (!out_) fail("cannot open for writing: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out_ << ',';
        out_ << header[i];
    }
    out_ << '\n';
}

void CsvWriter::row(std::span<const std::string> cells) {
    if (cells.size() != cols_) fail(path_ + ": row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << cells[i];
    }
    out_ << '\n';
}

void CsvWriter::close() {
    out_.close();
    if (!out_) fail("write failed: " + path_);
}

namespace {
std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}
}  // namespace

std::size_t CsvTable::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    fail("csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open: " + path);
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (lineno == 1) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size())
            fail(path + ":" + std::to_string(lineno) + ": expected " +
                 std::to_string(table.header.size()) + " columns, got " +
                 std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) fail(path + ": empty file");
    return table;
}

}  // namespace mmu
