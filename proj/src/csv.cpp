#include "mvnbc/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mvnbc {

std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) {
        if (cur.back() == '\r') cur.pop_back();
        lines.push_back(cur);
    }
    return lines;
}

int CsvTable::col(const std::string& name) const {
    for (size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name) return static_cast<int>(j);
    }
    return -1;
}

int CsvTable::require_col(const std::string& name) const {
    const int j = col(name);
    if (j < 0) throw CsvError(1, 0, "required column '" + name + "' is missing from the header");
    return j;
}

CsvTable parse_csv(const std::string& text) {
    const std::vector<std::string> lines = csv_lines(text);
    if (lines.empty() || lines[0].empty()) {
        throw CsvError(1, 0, "missing header line");
    }
    CsvTable table;
    table.header = csv_fields(lines[0]);
    const size_t width = table.header.size();
    for (size_t j = 0; j < width; ++j) {
        if (table.header[j].empty()) {
            throw CsvError(1, static_cast<int>(j + 1), "empty header field");
        }
    }

    std::vector<std::vector<double>> rows;
    for (size_t li = 1; li < lines.size(); ++li) {
        const int lineno = static_cast<int>(li + 1);
        if (lines[li].empty()) {
            if (li + 1 == lines.size()) break;  // single trailing blank line
            throw CsvError(lineno, 0, "blank line inside the table");
        }
        const std::vector<std::string> fields = csv_fields(lines[li]);
        if (fields.size() != width) {
            std::ostringstream msg;
            msg << "line " << lineno << " has " << fields.size() << " fields, header has "
                << width;
            throw CsvError(lineno, 0, msg.str());
        }
        std::vector<double> row(width);
        for (size_t j = 0; j < width; ++j) {
            const std::string& f = fields[j];
            double v = 0.0;
            const char* first = f.data();
            const char* last = f.data() + f.size();
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr != last || f.empty() || !std::isfinite(v)) {
                std::ostringstream msg;
                msg << "line " << lineno << ", column " << (j + 1) << " ('" << table.header[j]
                    << "'): cannot parse '" << f << "' as a finite number";
                throw CsvError(lineno, static_cast<int>(j + 1), msg.str());
            }
            row[j] = v;
        }
        rows.push_back(std::move(row));
    }

    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < width; ++j)
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError(0, 0, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace mvnbc
