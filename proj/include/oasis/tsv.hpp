#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "oasis/error.hpp"

namespace oasis::tsv {

// 17 significant digits: enough to reproduce any double exactly on reparse.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline double parse_double(std::string_view tok, const std::string& file, std::size_t lineno) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(file + ":" + std::to_string(lineno) + ": not a number: '" +
                         std::string(tok) + "'");
    return v;
}

inline std::int64_t parse_int(std::string_view tok, const std::string& file, std::size_t lineno) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(file + ":" + std::to_string(lineno) + ": not an integer: '" +
                         std::string(tok) + "'");
    return v;
}

// Line-oriented reader that tracks line numbers and enforces a header.
class Reader {
  public:
    explicit Reader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
        if (!in_) throw IoError("cannot open " + path_);
    }

    void expect_header(std::string_view header) {
        std::string line;
        if (!std::getline(in_, line)) throw ParseError(path_ + ":1: empty file");
        ++lineno_;
        if (line != header)
            throw ParseError(path_ + ":1: expected header '" + std::string(header) + "', got '" +
                             line + "'");
    }

    // Returns false at EOF; skips nothing (blank lines are errors for callers).
    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++lineno_;
        return true;
    }

    std::size_t lineno() const { return lineno_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(path_ + ":" + std::to_string(lineno_) + ": " + msg);
    }

  private:
    std::string path_;
    std::ifstream in_;
    std::size_t lineno_ = 0;
};

class Writer {
  public:
    explicit Writer(const std::filesystem::path& path) : path_(path.string()), out_(path) {
        if (!out_) throw IoError("cannot open " + path_ + " for writing");
    }
    void line(const std::string& s) { out_ << s << '\n'; }
    void close() {
        out_.close();
        if (!out_) throw IoError("write failed: " + path_);
    }

  private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace oasis::tsv
