#include "matshrink/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace matshrink {

Matrix read_matrix(std::istream& in)
{
    std::string line;
    std::vector<std::vector<double>> rows;
    long declared_n = -1;
    long declared_p = -1;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            continue;
        }
        if (line[first] == '#') {
            if (rows.empty() && declared_n < 0) {
                std::istringstream hs(line.substr(first + 1));
                long n = 0;
                long p = 0;
                std::string rest;
                if ((hs >> n >> p) && !(hs >> rest)) {
                    if (n < 1 || p < 1) {
                        throw ParseError("line " + std::to_string(line_no) + ": header dims must be positive");
                    }
                    declared_n = n;
                    declared_p = p;
                }
            }
            continue;
        }
        std::istringstream ls(line);
        std::vector<double> row;
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t used = 0;
                const double v = std::stod(tok, &used);
                if (used != tok.size()) {
                    throw std::invalid_argument(tok);
                }
                row.push_back(v);
            } catch (const std::exception&) {
                throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + tok + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw ParseError("matrix file has no data rows");
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(rows.front().size());
    if (declared_n >= 0 && (declared_n != n || declared_p != p)) {
        throw ParseError("header declares " + std::to_string(declared_n) + "x" + std::to_string(declared_p) +
                         " but data is " + std::to_string(n) + "x" + std::to_string(p));
    }
    Matrix m(n, p);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index i = 0; i < p; ++i) {
            m(a, i) = rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)];
        }
    }
    if (!m.allFinite()) {
        throw ParseError("matrix file contains non-finite values");
    }
    return m;
}

Matrix read_matrix_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open matrix file " + path.string());
    }
    return read_matrix(in);
}

void write_matrix(std::ostream& out, const Matrix& m, bool header)
{
    if (header) {
        out << "# " << m.rows() << ' ' << m.cols() << '\n';
    }
    char buf[40];
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
        for (Eigen::Index i = 0; i < m.cols(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", m(a, i));
            if (i > 0) {
                out << ' ';
            }
            out << buf;
        }
        out << '\n';
    }
}

void write_matrix_file(const std::filesystem::path& path, const Matrix& m, bool header)
{
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write matrix file " + path.string());
    }
    write_matrix(out, m, header);
}

}  // namespace matshrink
