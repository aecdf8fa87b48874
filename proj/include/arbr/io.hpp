#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "arbr/core.hpp"

namespace arbr {

// Machine outputs carry 17 significant digits so that doubles round-trip
// exactly and golden-file comparisons are byte-stable. Negative zero is
// flattened: JSON readers drop its sign, which would break round-trips.
inline std::string fmt_g17(double x) {
    if (x == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// Human-facing tables
inline std::string fmt_fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
    return buf;
}

// ---------------------------------------------------------------------------
// JVal — tiny insertion-ordered JSON document for outputs.
//
// nlohmann parses inputs; outputs go through this so that key order and
// number formatting are fully pinned.
// ---------------------------------------------------------------------------

class JVal {
public:
    static JVal num(double x) { return JVal(Kind::Raw, fmt_g17(x)); }
    static JVal integer(std::int64_t x) { return JVal(Kind::Raw, std::to_string(x)); }
    static JVal uinteger(std::uint64_t x) { return JVal(Kind::Raw, std::to_string(x)); }
    static JVal boolean(bool b) { return JVal(Kind::Raw, b ? "true" : "false"); }
    static JVal null() { return JVal(Kind::Raw, "null"); }
    static JVal str(const std::string& s) { return JVal(Kind::Str, s); }

    static JVal arr() { JVal v; v.kind_ = Kind::Arr; return v; }
    static JVal obj() { JVal v; v.kind_ = Kind::Obj; return v; }

    static JVal num_array(const std::vector<double>& xs) {
        JVal a = arr();
        for (double x : xs) a.push(num(x));
        return a;
    }

    JVal& push(JVal v) {
        items_.push_back({"", std::move(v)});
        return *this;
    }

    JVal& set(const std::string& key, JVal v) {
        items_.push_back({key, std::move(v)});
        return *this;
    }

    std::string dump(int indent = 2) const {
        std::string out;
        write(out, indent, 0);
        return out;
    }

private:
    enum class Kind { Raw, Str, Arr, Obj };

    JVal() = default;
    JVal(Kind k, std::string raw) : kind_(k), raw_(std::move(raw)) {}

    static void escape_into(std::string& out, const std::string& s) {
        out += '"';
        for (char c : s) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\r': out += "\\r"; break;
                case '\t': out += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                        out += buf;
                    } else {
                        out += c;
                    }
            }
        }
        out += '"';
    }

    void write(std::string& out, int indent, int depth) const {
        const std::string pad(indent > 0 ? static_cast<std::size_t>(indent * (depth + 1)) : 0, ' ');
        const std::string pad_close(indent > 0 ? static_cast<std::size_t>(indent * depth) : 0, ' ');
        const char* nl = indent > 0 ? "\n" : "";
        switch (kind_) {
            case Kind::Raw: out += raw_; break;
            case Kind::Str: escape_into(out, raw_); break;
            case Kind::Arr: {
                if (items_.empty()) { out += "[]"; break; }
                out += '[';
                out += nl;
                for (std::size_t i = 0; i < items_.size(); ++i) {
                    out += pad;
                    items_[i].second.write(out, indent, depth + 1);
                    if (i + 1 < items_.size()) out += ',';
                    out += nl;
                }
                out += pad_close;
                out += ']';
                break;
            }
            case Kind::Obj: {
                if (items_.empty()) { out += "{}"; break; }
                out += '{';
                out += nl;
                for (std::size_t i = 0; i < items_.size(); ++i) {
                    out += pad;
                    escape_into(out, items_[i].first);
                    out += indent > 0 ? ": " : ":";
                    items_[i].second.write(out, indent, depth + 1);
                    if (i + 1 < items_.size()) out += ',';
                    out += nl;
                }
                out += pad_close;
                out += '}';
                break;
            }
        }
    }

    Kind kind_ = Kind::Raw;
    std::string raw_;
    std::vector<std::pair<std::string, JVal>> items_;
};

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot open: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace arbr
