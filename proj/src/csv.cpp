#include "panelssm/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "panelssm/errors.hpp"

namespace panelssm {

std::string format_double(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last) {
        // from_chars does not accept "inf"/"nan" spellings everywhere.
        if (s == "inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
        if (s == "nan" || s == "-nan") return NAN;
        throw ArgumentError("parse_double: cannot parse '" + s + "'");
    }
    return value;
}

std::size_t Table::col_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw ArgumentError("table: no column named '" + name + "'");
}

void Table::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns.size())
        throw ArgumentError("table: row width does not match header");
    rows.push_back(std::move(cells));
}

namespace {

bool needs_quoting(const std::string& cell) {
    return cell.find_first_of(",\"\n\r") != std::string::npos;
}

void append_cell(std::string& out, const std::string& cell) {
    if (!needs_quoting(cell)) {
        out += cell;
        return;
    }
    out += '"';
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) out += ',';
        append_cell(out, cells[i]);
    }
    out += '\n';
}

}  // namespace

std::string to_csv(const Table& t) {
    std::string out;
    append_line(out, t.columns);
    for (const auto& row : t.rows) append_line(out, row);
    return out;
}

void write_csv(const std::string& path, const Table& t) { write_text_file(path, to_csv(t)); }

Table read_csv_string(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool in_quotes = false;
    bool cell_started = false;

    auto end_cell = [&] {
        record.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
    };
    auto end_record = [&] {
        end_cell();
        records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"' && !cell_started) {
            in_quotes = true;
            cell_started = true;
        } else if (c == ',') {
            end_cell();
        } else if (c == '\n') {
            end_record();
        } else if (c == '\r') {
            // swallow; \r\n handled by the \n branch
        } else {
            cell += c;
            cell_started = true;
        }
    }
    if (in_quotes) throw ArgumentError("csv: unterminated quoted cell");
    if (cell_started || !record.empty()) end_record();

    if (records.empty()) throw ArgumentError("csv: empty input");
    Table t;
    t.columns = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.columns.size())
            throw ArgumentError("csv: ragged row " + std::to_string(r));
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

Table read_csv(const std::string& path) { return read_csv_string(read_text_file(path)); }

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace panelssm
