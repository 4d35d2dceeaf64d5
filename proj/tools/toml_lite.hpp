#pragma once

// Reader for the subset of TOML used by run configurations:
//   key = value             bare or "quoted" keys
//   [table] / [a.b]         nested tables
//   [[name]]                arrays of tables
//   strings, numbers, booleans and (possibly multi-line) arrays of them.
// Inline tables and dates are not supported. The result is a JSON tree.

#include <cctype>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace tomlite {

using json = nlohmann::json;

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what) {}
};

namespace detail {

class Cursor {
public:
    Cursor(const std::string& s, std::size_t line) : s_(s), line_(line) {}

    void skip_ws() {
        while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\n' || s_[i_] == '\r')) ++i_;
        if (i_ < s_.size() && s_[i_] == '#') {
            while (i_ < s_.size() && s_[i_] != '\n') ++i_;
            skip_ws();
        }
    }
    bool done() const { return i_ >= s_.size(); }
    char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
    char get() { return i_ < s_.size() ? s_[i_++] : '\0'; }
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

    std::string quoted() {
        const char q = get();
        std::string out;
        while (true) {
            if (done()) fail("unterminated string");
            char c = get();
            if (c == q) break;
            if (c == '\\' && q == '"') {
                const char e = get();
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            }
            out.push_back(c);
        }
        return out;
    }

    std::string bare_key() {
        std::string out;
        while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
            out.push_back(get());
        }
        if (out.empty()) fail("expected a key");
        return out;
    }

    std::string key() {
        skip_ws();
        return (peek() == '"' || peek() == '\'') ? quoted() : bare_key();
    }

    json value() {
        skip_ws();
        const char c = peek();
        if (c == '"' || c == '\'') return quoted();
        if (c == '[') {
            get();
            json arr = json::array();
            while (true) {
                skip_ws();
                if (peek() == ']') {
                    get();
                    return arr;
                }
                arr.push_back(value());
                skip_ws();
                if (peek() == ',') {
                    get();
                } else if (peek() != ']') {
                    fail("expected ',' or ']' in array");
                }
            }
        }
        std::string tok;
        while (!done() && peek() != ',' && peek() != ']' && peek() != '#' && !std::isspace(static_cast<unsigned char>(peek()))) {
            tok.push_back(get());
        }
        if (tok == "true") return true;
        if (tok == "false") return false;
        if (tok.empty()) fail("expected a value");
        std::string digits;
        for (char ch : tok) {
            if (ch != '_') digits.push_back(ch);
        }
        const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" ||
                              digits == "+inf" || digits == "-inf" || digits == "nan";
        try {
            std::size_t used = 0;
            if (is_float) {
                const double v = std::stod(digits, &used);
                if (used == digits.size()) return v;
            } else {
                const long long v = std::stoll(digits, &used);
                if (used == digits.size()) return v;
            }
        } catch (const std::exception&) {
        }
        fail("invalid value '" + tok + "'");
    }

private:
    const std::string& s_;
    std::size_t line_;
    std::size_t i_ = 0;
};

inline int bracket_balance(const std::string& s) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (quote) {
            if (c == '\\' && quote == '"') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            break;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            --depth;
        }
    }
    return depth;
}

inline std::vector<std::string> split_path(Cursor& cur) {
    std::vector<std::string> parts{cur.key()};
    cur.skip_ws();
    while (cur.peek() == '.') {
        cur.get();
        parts.push_back(cur.key());
        cur.skip_ws();
    }
    return parts;
}

}  // namespace detail

inline json parse(std::istream& in) {
    json root = json::object();
    json* current = &root;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t start_line = line_no;
        detail::Cursor probe(line, line_no);
        probe.skip_ws();
        if (probe.done()) continue;

        if (probe.peek() == '[') {
            const bool array_table = line.find("[[") != std::string::npos &&
                                     line.find_first_not_of(" \t") == line.find("[[");
            detail::Cursor cur(line, line_no);
            cur.skip_ws();
            cur.get();
            if (array_table) cur.get();
            const auto path = detail::split_path(cur);
            if (cur.get() != ']' || (array_table && cur.get() != ']')) cur.fail("malformed table header");
            cur.skip_ws();
            if (!cur.done()) cur.fail("trailing characters after table header");
            json* node = &root;
            for (std::size_t i = 0; i < path.size(); ++i) {
                json& child = (*node)[path[i]];
                const bool last = i + 1 == path.size();
                if (last && array_table) {
                    if (child.is_null()) child = json::array();
                    if (!child.is_array()) cur.fail("'" + path[i] + "' is not an array of tables");
                    child.push_back(json::object());
                    node = &child.back();
                } else {
                    if (child.is_null()) child = json::object();
                    if (child.is_array() && !child.empty() && child.back().is_object()) {
                        node = &child.back();
                    } else if (child.is_object()) {
                        node = &child;
                    } else {
                        cur.fail("'" + path[i] + "' is not a table");
                    }
                }
            }
            current = node;
            continue;
        }

        std::string text = line;
        while (detail::bracket_balance(text) > 0) {
            std::string more;
            if (!std::getline(in, more)) throw ParseError(start_line, "unterminated array");
            ++line_no;
            text += "\n" + more;
        }
        detail::Cursor cur(text, start_line);
        const std::string key = cur.key();
        cur.skip_ws();
        if (cur.peek() == '.') cur.fail("dotted keys are not supported");
        if (cur.get() != '=') cur.fail("expected '=' after key '" + key + "'");
        json v = cur.value();
        cur.skip_ws();
        if (!cur.done()) cur.fail("trailing characters after value of '" + key + "'");
        if (current->contains(key)) cur.fail("duplicate key '" + key + "'");
        (*current)[key] = std::move(v);
    }
    return root;
}

inline json parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

}  // namespace tomlite
