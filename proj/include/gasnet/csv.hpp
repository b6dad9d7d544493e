#pragma once

// Small CSV utilities shared by the network/scenario/report file formats.
// All formats are plain UTF-8, '.' decimal point, '#' comments.

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gasnet/errors.hpp"

namespace gasnet::csv {

inline std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string& tok, int line, int column) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("expected a number, got '" + tok + "'", line, column);
    return value;
}

/// One logical CSV line with its 1-based source line number.
struct Line {
    std::string text;
    int number = 0;
};

/// Reads all lines, dropping blank ones. Comments ('#'-prefixed) are kept
/// so callers can interpret section markers like "# pipes".
inline std::vector<Line> read_lines(std::istream& in) {
    std::vector<Line> lines;
    std::string raw;
    int n = 0;
    while (std::getline(in, raw)) {
        ++n;
        std::string t = trim(raw);
        if (t.empty()) continue;
        lines.push_back({std::move(t), n});
    }
    return lines;
}

inline std::string format_double(double v) {
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

inline void write_matrix_file(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot open '" + path + "' for writing");
    write_matrix(os, m);
}

inline Eigen::MatrixXd read_matrix(std::istream& in) {
    std::vector<std::vector<double>> rows;
    for (const Line& ln : read_lines(in)) {
        if (ln.text[0] == '#') continue;
        auto toks = split(ln.text);
        std::vector<double> row;
        row.reserve(toks.size());
        for (size_t j = 0; j < toks.size(); ++j)
            row.push_back(parse_double(toks[j], ln.number, int(j + 1)));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("ragged matrix row", ln.number);
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

inline Eigen::MatrixXd read_matrix_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open '" + path + "'");
    return read_matrix(is);
}

/// FNV-1a, used for reproducible provenance hashes.
inline uint64_t fnv1a(std::string_view bytes, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hash_hex(uint64_t h) {
    char buf[20];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace gasnet::csv
