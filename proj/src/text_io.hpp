#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "knet/errors.hpp"

namespace knet::detail {

/// 17 significant digits: enough for an exact double round trip.
inline std::string format_double(double value) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

/// Line reader that tracks 1-based line numbers for parse diagnostics.
class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    std::size_t line_no() const noexcept { return line_no_; }

    [[noreturn]] void fail(const std::string& message) const {
        throw ParseError(source_ + ":" + std::to_string(line_no_) + ": " + message);
    }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_no_ = 0;
};

/// Parses "key=value" where key must match.
template <typename Int>
bool parse_keyed(std::string_view token, std::string_view key, Int& out) {
    if (token.size() <= key.size() + 1 || token.substr(0, key.size()) != key || token[key.size()] != '=') {
        return false;
    }
    return parse_int(token.substr(key.size() + 1), out);
}

}  // namespace knet::detail
