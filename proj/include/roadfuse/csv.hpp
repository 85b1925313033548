#pragma once

// Minimal CSV helpers shared by the file interfaces. All files are UTF-8,
// comma separated, '.' decimal separator, with a mandatory header row.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace roadfuse::csv {

/// Error for malformed input files; carries the offending path and line.
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    // Strip trailing CR from files written on Windows.
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

inline double to_double(const std::string& field, const std::string& context) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw ParseError("bad numeric field '" + field + "' in " + context);
    return value;
}

inline long long to_int(const std::string& field, const std::string& context) {
    long long value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw ParseError("bad integer field '" + field + "' in " + context);
    return value;
}

/// Shortest representation that parses back to exactly the same double.
/// Deterministic byte-for-byte, so identical values always serialize to
/// identical output files, and reading a file back loses no precision.
inline std::string num(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("csv::num: value does not format");
    return std::string(buf, ptr);
}

struct Reader {
    explicit Reader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw ParseError("cannot open " + path);
        if (!std::getline(in_, line_)) {
            header_.clear();
            eof_ = true;
            return;
        }
        header_ = split(line_);
        line_no_ = 1;
    }

    /// Opens and checks the header row against `expected` in one go.
    Reader(const std::string& path, const std::vector<std::string>& expected) : Reader(path) {
        if (header_ != expected) {
            std::string want;
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (i) want += ',';
                want += expected[i];
            }
            throw ParseError("unexpected header in " + path + " (want '" + want + "')");
        }
    }

    const std::vector<std::string>& header() const { return header_; }

    bool next(std::vector<std::string>& fields) {
        if (eof_) return false;
        while (std::getline(in_, line_)) {
            ++line_no_;
            if (line_.empty()) continue;
            fields = split(line_);
            return true;
        }
        eof_ = true;
        return false;
    }

    std::string context() const {
        return path_ + ":" + std::to_string(line_no_);
    }

    /// Like context(), naming the column being parsed.
    std::string context(const std::string& column) const {
        return column + " at " + context();
    }

  private:
    std::string path_;
    std::ifstream in_;
    std::string line_;
    std::vector<std::string> header_;
    std::size_t line_no_ = 0;
    bool eof_ = false;
};

struct Writer {
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void raw(const std::string& line) { out_ << line << '\n'; }

  private:
    std::ofstream out_;
};

} // namespace roadfuse::csv
