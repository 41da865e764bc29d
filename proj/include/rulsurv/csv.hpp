#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rulsurv/common.hpp"

namespace rulsurv {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim whitespace and trailing CR
        const auto first = field.find_first_not_of(" \t\r");
        const auto last = field.find_last_not_of(" \t\r");
        fields.push_back(first == std::string::npos ? std::string{}
                                                    : field.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

/// Reads a CSV file into header + rows of strings.
inline std::pair<std::vector<std::string>, std::vector<std::vector<std::string>>> read_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "read_csv: cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "read_csv: empty file " + path.string());
    auto header = split_csv_line(line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_line(line));
    }
    return {std::move(header), std::move(rows)};
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        require(pos == s.size(), context + ": trailing characters in number '" + s + "'");
        return v;
    } catch (const std::exception&) {
        throw error(context + ": cannot parse number '" + s + "'");
    }
}

/// Shortest round-trip decimal formatting, stable across runs.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // prefer the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
        if (std::stod(probe) == v) return probe;
    }
    return buf;
}

/// Writes a file atomically: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const auto parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "write_file_atomic: cannot open " + tmp);
        out << contents;
        require(out.good(), "write_file_atomic: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace rulsurv
