#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "map.hpp"

namespace c2dyn {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view tok, int line) {
    double v = 0.0;
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    if (!tok.empty() && *b == '+') ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw Error(ErrorCode::Config, "line " + std::to_string(line) + ": bad number '" + std::string(tok) + "'");
    return v;
}

inline int parse_int(std::string_view tok, int line) {
    int v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw Error(ErrorCode::Config, "line " + std::to_string(line) + ": bad integer '" + std::string(tok) + "'");
    return v;
}

} // namespace detail

/*
 * Map config text:
 *
 *   # comment
 *   label = skew
 *   degree = 2
 *   comp1 = 2 0 1 0        (i j re im: coefficient of z^i w^j)
 *   comp1 = 0 0 -0.1 0
 *   comp2 = ...
 */
inline MapSpec parse_map_config(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    int degree = -1;
    std::string label;
    MapSpec::Table t[2];
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = detail::trim(raw);
        if (s.empty() || s.front() == '#') continue;
        auto eq = s.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorCode::Config, "line " + std::to_string(line) + ": expected key = value");
        std::string_view key = detail::trim(s.substr(0, eq));
        std::string_view val = detail::trim(s.substr(eq + 1));
        if (key == "label") {
            label = std::string(val);
        } else if (key == "degree") {
            degree = detail::parse_int(val, line);
        } else if (key == "comp1" || key == "comp2") {
            std::string_view tok[4];
            int n = 0;
            std::size_t pos = 0;
            while (pos < val.size()) {
                while (pos < val.size() && (val[pos] == ' ' || val[pos] == '\t')) ++pos;
                std::size_t start = pos;
                while (pos < val.size() && val[pos] != ' ' && val[pos] != '\t') ++pos;
                if (pos > start) {
                    if (n == 4) throw Error(ErrorCode::Config, "line " + std::to_string(line) + ": too many fields");
                    tok[n++] = val.substr(start, pos - start);
                }
            }
            if (n != 4) throw Error(ErrorCode::Config, "line " + std::to_string(line) + ": expected 'i j re im'");
            int i = detail::parse_int(tok[0], line), j = detail::parse_int(tok[1], line);
            cplx c(detail::parse_double(tok[2], line), detail::parse_double(tok[3], line));
            auto& tab = t[key == "comp1" ? 0 : 1];
            if (!tab.emplace(std::make_pair(i, j), c).second)
                throw Error(ErrorCode::Config, "line " + std::to_string(line) + ": duplicate exponent pair");
        } else {
            throw Error(ErrorCode::Config, "line " + std::to_string(line) + ": unknown key '" + std::string(key) + "'");
        }
    }
    if (degree < 0) throw Error(ErrorCode::Config, "missing degree");
    return MapSpec(degree, t[0], t[1], label);
}

inline std::string format_map_config(const MapSpec& f) {
    std::string out;
    out += "label = " + f.label() + "\n";
    out += "degree = " + std::to_string(f.degree()) + "\n";
    for (int k = 0; k < 2; ++k)
        for (const auto& [ij, c] : f.table(k))
            out += "comp" + std::to_string(k + 1) + " = " + std::to_string(ij.first) + " " + std::to_string(ij.second) +
                   " " + format_double(c.real()) + " " + format_double(c.imag()) + "\n";
    return out;
}

inline MapSpec load_map_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot open map config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_map_config(ss.str());
}

inline void save_map_config(const MapSpec& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Config, "cannot write '" + path + "'");
    out << format_map_config(f);
}

/// A few maps used throughout the tests and examples.
namespace maps {

inline MapSpec product_quadratic(cplx c1, cplx c2, std::string label = "") {
    MapSpec::Table a{{{2, 0}, 1.0}}, b{{{0, 2}, 1.0}};
    if (c1 != cplx(0.0)) a[{0, 0}] = c1;
    if (c2 != cplx(0.0)) b[{0, 0}] = c2;
    return MapSpec(2, a, b, label);
}

/// (z^2 - 0.1, w^2 - z^2 + 0.2 z - 0.5 i)
inline MapSpec basilica_skew() {
    MapSpec::Table a{{{2, 0}, 1.0}, {{0, 0}, -0.1}};
    MapSpec::Table b{{{0, 2}, 1.0}, {{2, 0}, -1.0}, {{1, 0}, 0.2}, {{0, 0}, cplx(0.0, -0.5)}};
    return MapSpec(2, a, b, "basilica_skew");
}

/// (w^2, z^2)
inline MapSpec swap_squares() {
    return MapSpec(2, {{{0, 2}, 1.0}}, {{{2, 0}, 1.0}}, "swap");
}

} // namespace maps

} // namespace c2dyn
