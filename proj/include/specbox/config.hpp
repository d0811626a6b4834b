#pragma once

// Experiment config loader. Files are TOML (the subset below) or JSON, parsed
// into a JSON object keyed by table name:
//   - [table] / [table.sub] headers
//   - key = value with bare or dotted keys
//   - values: "strings", integers, floats, true/false, [arrays of scalars]
//   - # comments

#include <cctype>
#include <filesystem>
#include <string>
#include <vector>

#include "specbox/common.hpp"
#include "specbox/io.hpp"
#include "specbox/types.hpp"

namespace specbox {

namespace detail {

inline void skip_ws(const std::string& s, std::size_t& i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline json parse_toml_scalar(const std::string& s, std::size_t& i, std::size_t line_no) {
    skip_ws(s, i);
    if (i >= s.size()) throw ParseError("expected a value", line_no);
    if (s[i] == '"') {
        std::string out;
        ++i;
        while (i < s.size() && s[i] != '"') {
            if (s[i] == '\\' && i + 1 < s.size()) {
                ++i;
                switch (s[i]) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: throw ParseError("unsupported escape", line_no);
                }
            } else {
                out += s[i];
            }
            ++i;
        }
        if (i >= s.size()) throw ParseError("unterminated string", line_no);
        ++i;
        return json(out);
    }
    std::size_t start = i;
    while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != '#' &&
           s[i] != ' ' && s[i] != '\t')
        ++i;
    std::string tok = s.substr(start, i - start);
    if (tok.empty()) throw ParseError("expected a value", line_no);
    if (tok == "true") return json(true);
    if (tok == "false") return json(false);
    const bool is_float = tok.find_first_of(".eE") != std::string::npos ||
                          tok == "inf" || tok == "-inf";
    try {
        std::size_t used = 0;
        if (is_float) {
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw ParseError("bad number: " + tok, line_no);
            return json(v);
        }
        const long long v = std::stoll(tok, &used);
        if (used != tok.size()) throw ParseError("bad number: " + tok, line_no);
        return json(v);
    } catch (const std::logic_error&) {
        throw ParseError("bad value: " + tok, line_no);
    }
}

inline json parse_toml_value(const std::string& s, std::size_t& i, std::size_t line_no) {
    skip_ws(s, i);
    if (i < s.size() && s[i] == '[') {
        json arr = json::array();
        ++i;
        skip_ws(s, i);
        if (i < s.size() && s[i] == ']') { ++i; return arr; }
        while (true) {
            arr.push_back(parse_toml_scalar(s, i, line_no));
            skip_ws(s, i);
            if (i < s.size() && s[i] == ',') {
                ++i;
                skip_ws(s, i);
                if (i < s.size() && s[i] == ']') { ++i; return arr; }
                continue;
            }
            if (i < s.size() && s[i] == ']') { ++i; return arr; }
            throw ParseError("expected ',' or ']' in array", line_no);
        }
    }
    return parse_toml_scalar(s, i, line_no);
}

inline json* descend(json& root, const std::string& dotted, std::size_t line_no) {
    json* node = &root;
    std::size_t pos = 0;
    while (pos <= dotted.size()) {
        const std::size_t dot = dotted.find('.', pos);
        const std::string key =
            dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw ParseError("empty key segment in '" + dotted + "'", line_no);
        if (!node->contains(key)) (*node)[key] = json::object();
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    return node;
}

} // namespace detail

inline json parse_toml(const std::string& text) {
    json root = json::object();
    json* table = &root;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t i = 0;
        detail::skip_ws(line, i);
        if (i >= line.size() || line[i] == '#') continue;
        if (line[i] == '[') {
            const std::size_t close = line.find(']', i);
            if (close == std::string::npos) throw ParseError("unterminated table header", line_no);
            std::string name = line.substr(i + 1, close - i - 1);
            if (name.empty()) throw ParseError("empty table name", line_no);
            table = detail::descend(root, name, line_no);
            i = close + 1;
            detail::skip_ws(line, i);
            if (i < line.size() && line[i] != '#')
                throw ParseError("trailing characters after table header", line_no);
            continue;
        }
        const std::size_t eq = line.find('=', i);
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        std::string key = line.substr(i, eq - i);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        if (key.empty()) throw ParseError("empty key", line_no);
        std::size_t vi = eq + 1;
        json value = detail::parse_toml_value(line, vi, line_no);
        detail::skip_ws(line, vi);
        if (vi < line.size() && line[vi] != '#')
            throw ParseError("trailing characters after value", line_no);
        json* node = detail::descend(*table, key, line_no);
        *node = value;
    }
    return root;
}

inline json load_config(const std::filesystem::path& path) {
    if (path.extension() == ".json") return read_json_file(path);
    return parse_toml(read_text_file(path));
}

} // namespace specbox
