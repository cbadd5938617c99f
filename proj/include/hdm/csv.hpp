#pragma once

#include "hdm/error.hpp"
#include "hdm/linalg.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hdm {

/// Reads a numeric CSV into a matrix, one row per line. A first line that does not parse
/// as numbers is treated as a header.
inline Matrix read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), ErrorKind::Io, "cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cell, &used));
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) numeric = false;
            } catch (const std::logic_error&) {
                numeric = false;
            }
        }
        if (!numeric) {
            require(first, ErrorKind::Io, path + ": non-numeric row after the header");
            first = false;
            continue;
        }
        first = false;
        require(rows.empty() || values.size() == rows.front().size(), ErrorKind::Io, path + ": ragged rows");
        rows.push_back(std::move(values));
    }
    require(!rows.empty(), ErrorKind::Io, path + ": no data rows");
    Matrix m(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
    return m;
}

inline void write_csv_matrix(std::ostream& out, const Matrix& m, const std::string& header_prefix = "c") {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << header_prefix << c;
    out << '\n';
    out.precision(17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << '\n';
    }
}

}  // namespace hdm
