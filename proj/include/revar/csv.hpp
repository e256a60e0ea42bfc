#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revar/error.hpp"

namespace revar::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

inline std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::optional<long long> to_int(std::string_view s) {
    s = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Line reader that tracks 1-based line numbers and skips blank lines.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!trim(line).empty()) return true;
        }
        return false;
    }

    std::size_t line_number() const noexcept { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    return in;
}

/// Reads the header line and checks it against the expected column names.
inline void expect_header(Reader& reader, const std::vector<std::string_view>& columns) {
    std::string line;
    if (!reader.next(line)) throw ParseError(1, "empty file, expected header");
    const auto fields = split(line);
    bool ok = fields.size() == columns.size();
    for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = fields[i] == columns[i];
    if (!ok) {
        std::string expected;
        for (auto c : columns) expected += (expected.empty() ? "" : ",") + std::string(c);
        throw ParseError(reader.line_number(), "header mismatch, expected '" + expected + "'");
    }
}

}  // namespace revar::csv
