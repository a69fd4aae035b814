#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "common.hpp"

namespace nsr {

/// Round-trip formatting for CSV cells; deterministic for a given build.
inline std::string csv_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Minimal CSV emitter: UTF-8, '.' decimal separator, header row mandatory.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header) : out_(path, std::ios::trunc) {
        if (!out_) throw IoError("cannot open for writing: " + path);
        out_ << header << "\n";
        path_ = path;
    }

    template <typename... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << "\n";
    }

    void close() {
        out_.close();
        if (out_.fail()) throw IoError("write failed: " + path_);
    }

private:
    static std::string cell(double v) { return csv_double(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static const std::string& cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }

    std::ofstream out_;
    std::string path_;
};

} // namespace nsr
