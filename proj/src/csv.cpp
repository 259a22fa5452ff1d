#include "rlfi/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rlfi::csv {

int Table::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int Table::require(const std::string& name) const {
    const int i = col(name);
    if (i < 0)
        throw std::runtime_error(path + ": missing mandatory column '" + name + "'");
    return i;
}

namespace {

char detect_delimiter(const std::string& line) {
    std::size_t commas = 0, tabs = 0;
    bool in_quotes = false;
    for (char c : line) {
        if (c == '"') in_quotes = !in_quotes;
        else if (!in_quotes && c == ',') ++commas;
        else if (!in_quotes && c == '\t') ++tabs;
    }
    return tabs > commas ? '\t' : ',';
}

}  // namespace

Table read_delimited(const std::string& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    std::size_t pos = 0;
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB &&
        static_cast<unsigned char>(text[2]) == 0xBF)
        pos = 3;

    Table t;
    t.path = path;

    std::size_t line_no = 1;
    // Skip comment lines before the header.
    while (pos < text.size() && text[pos] == '#') {
        while (pos < text.size() && text[pos] != '\n') ++pos;
        if (pos < text.size()) ++pos;
        ++line_no;
    }

    if (delimiter == '\0') {
        std::size_t eol = text.find('\n', pos);
        t.delimiter = detect_delimiter(text.substr(pos, eol == std::string::npos ? eol : eol - pos));
    } else {
        t.delimiter = delimiter;
    }

    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool at_field_start = true;  // quotes are special only here
    bool row_has_data = false;
    std::size_t row_start_line = line_no;

    auto end_field = [&]() {
        fields.push_back(field);
        field.clear();
        at_field_start = true;
    };
    auto end_row = [&]() {
        end_field();
        if (t.header.empty()) {
            t.header = fields;
        } else {
            t.rows.push_back(fields);
            t.line.push_back(row_start_line);
        }
        fields.clear();
        row_has_data = false;
    };

    for (; pos < text.size(); ++pos) {
        const char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field += '"';
                    ++pos;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
                if (c == '\n') ++line_no;
            }
            row_has_data = true;
            continue;
        }
        if (c == '"' && at_field_start) {
            in_quotes = true;
            at_field_start = false;
            row_has_data = true;
        } else if (c == t.delimiter) {
            end_field();
            row_has_data = true;
        } else if (c == '\n') {
            if (row_has_data || !field.empty() || !fields.empty()) end_row();
            ++line_no;
            row_start_line = line_no;
        } else if (c == '\r') {
            // swallowed; \r\n handled by the \n branch
        } else {
            field += c;
            at_field_start = false;
            row_has_data = true;
        }
    }
    if (row_has_data || !field.empty() || !fields.empty()) end_row();
    if (in_quotes)
        throw std::runtime_error(path + ": unterminated quoted field");
    return t;
}

std::string escape_field(const std::string& field, char delimiter) {
    bool needs = false;
    for (char c : field)
        if (c == delimiter || c == '"' || c == '\n' || c == '\r') { needs = true; break; }
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::string& meta_comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    if (!meta_comment.empty()) out << "# " << meta_comment << "\n";
    auto write_row = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out << ',';
            out << escape_field(r[i]);
        }
        out << '\n';
    };
    write_row(header);
    for (const auto& r : rows) write_row(r);
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace rlfi::csv
