#pragma once

#include <string>
#include <vector>

namespace rlfi::csv {

// Parsed delimited file. Rows hold raw field strings; line tracks the
// 1-based source line each row started on (quoted fields may span lines).
struct Table {
    std::string path;
    char delimiter = ',';
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line;

    // Column index by exact header name, -1 if absent.
    int col(const std::string& name) const;
    // Same, but throws naming the column and file when missing.
    int require(const std::string& name) const;
};

// Reads a CSV/TSV file. delimiter '\0' auto-detects between comma and tab
// from the header row. Leading '#' comment lines and a UTF-8 BOM are
// skipped. Quoting follows RFC 4180 (double quotes, "" escapes, embedded
// delimiters/newlines allowed inside quotes).
Table read_delimited(const std::string& path, char delimiter = '\0');

// Field quoting for output; only quotes when needed.
std::string escape_field(const std::string& field, char delimiter = ',');

// Writes a CSV. When meta_comment is non-empty it is emitted first as a
// "# ..." line (readers here skip such lines).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::string& meta_comment = "");

std::string format_double(double v);  // shortest stable representation, %.12g

}  // namespace rlfi::csv
