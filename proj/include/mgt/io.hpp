#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mgt/errors.hpp"

namespace mgt {

/// Shortest "%.17g" text; NaN and infinities as nan, inf, -inf.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// RFC 4180 field: quoted when it contains a comma, quote, CR or LF.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

/// In-memory CSV table with a fixed header; rows end in CRLF.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) { append(header_); }

    void add_row(const std::vector<double>& values) {
        if (values.size() != header_.size()) throw ValidationError("csv row width does not match the header");
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_double(v));
        append(cells);
    }
    void add_row(const std::vector<std::string>& cells) {
        if (cells.size() != header_.size()) throw ValidationError("csv row width does not match the header");
        append(cells);
    }
    [[nodiscard]] const std::string& text() const { return text_; }
    [[nodiscard]] const std::vector<std::string>& header() const { return header_; }

private:
    void append(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += csv_field(cells[i]);
        }
        text_ += "\r\n";
    }
    std::vector<std::string> header_;
    std::string text_;
};

/// Writes through a temporary file in the target directory and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string(), exit_code::generic);
        out << contents;
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string(), exit_code::generic);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message(), exit_code::generic);
    }
}

}  // namespace mgt
