#pragma once

#include "mvnbc/types.hpp"

#include <string>
#include <vector>

namespace mvnbc {

struct CsvError : Error {
    int row;  // 1-based line number (header is line 1); 0 when not line-specific
    int col;  // 1-based column number; 0 when not column-specific
    CsvError(int row_, int col_, const std::string& msg) : Error(msg), row(row_), col(col_) {}
};

// Numeric table with a named header row. Strict format: comma-delimited,
// '.' decimal point, one header line, every record with the same arity, every
// body cell a finite number. CRLF line endings and one trailing newline are
// tolerated.
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;

    // column index by name, -1 when absent
    int col(const std::string& name) const;
    // like col(), but throws CsvError naming the missing column
    int require_col(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

// Low-level pieces for tables with string-valued cells: split into lines
// (CRLF-tolerant) and split one record on commas.
std::vector<std::string> csv_lines(const std::string& text);
std::vector<std::string> csv_fields(const std::string& line);

// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

}  // namespace mvnbc
