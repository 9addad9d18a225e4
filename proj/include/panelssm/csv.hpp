#ifndef PANELSSM_CSV_HPP
#define PANELSSM_CSV_HPP

#include <string>
#include <vector>

namespace panelssm {

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double x);

double parse_double(const std::string& s);

// In-memory CSV table; every cell is kept as text so that writing and
// re-parsing reproduce the file byte for byte.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t col_index(const std::string& name) const;  // throws if absent
    void add_row(std::vector<std::string> cells);
};

std::string to_csv(const Table& t);
void write_csv(const std::string& path, const Table& t);
Table read_csv_string(const std::string& text);
Table read_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace panelssm

#endif
