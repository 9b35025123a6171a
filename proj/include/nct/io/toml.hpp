#pragma once

// The TOML subset used by run configs, parsed into JSON: [table] and
// [a.b] headers, bare/quoted/dotted keys, basic and literal strings,
// integers, floats (including inf/nan), booleans, arrays (which may span
// lines) and inline tables. Dates and multi-line strings are rejected.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nct/error.hpp"

namespace nct {

namespace toml_detail {

using Json = nlohmann::json;

class Parser {
 public:
  Parser(std::string text, std::string origin) : s_(std::move(text)), origin_(std::move(origin)) {}

  Json parse_document() {
    Json root = Json::object();
    Json* table = &root;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        if (peek(1) == '[') fail("arrays of tables are not supported");
        ++i_;
        skip_ws();
        const auto path = parse_key_path();
        skip_ws();
        expect(']');
        table = &descend(root, path, true);
      } else {
        const auto path = parse_key_path();
        skip_ws();
        expect('=');
        skip_ws();
        Json value = parse_value();
        assign(*table, path, std::move(value));
      }
      end_of_line();
    }
    return root;
  }

  Json parse_single_value() {
    skip_ws();
    Json v = parse_value();
    skip_ws();
    if (!eof()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError(origin_ + ":" + std::to_string(line_) + ": " + why);
  }
  bool eof() const { return i_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const { return i_ + ahead < s_.size() ? s_[i_ + ahead] : '\0'; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }
  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++i_;
    }
  }
  void skip_ws_comments_newlines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\r') ++i_;
      if (peek() == '\n') {
        ++i_;
        ++line_;
      } else {
        break;
      }
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++i_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected characters at end of line");
    ++i_;
    ++line_;
  }

  static bool bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string parse_key() {
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    const std::size_t start = i_;
    while (!eof() && bare_char(peek())) ++i_;
    if (start == i_) fail("expected a key");
    return s_.substr(start, i_ - start);
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> path{parse_key()};
    skip_ws();
    while (peek() == '.') {
      ++i_;
      skip_ws();
      path.push_back(parse_key());
      skip_ws();
    }
    return path;
  }

  Json& descend(Json& root, const std::vector<std::string>& path, bool header) {
    Json* t = &root;
    for (std::size_t k = 0; k < path.size(); ++k) {
      Json& next = (*t)[path[k]];
      if (next.is_null()) {
        next = Json::object();
      } else if (!next.is_object()) {
        fail("key '" + path[k] + "' is already a value, not a table");
      } else if (header && k + 1 == path.size() && defined_tables_.count(joined(path, k + 1))) {
        fail("table [" + joined(path, k + 1) + "] defined twice");
      }
      t = &next;
    }
    if (header) defined_tables_.insert(joined(path, path.size()));
    return *t;
  }

  static std::string joined(const std::vector<std::string>& path, std::size_t n) {
    std::string out;
    for (std::size_t k = 0; k < n; ++k) out += (k ? "." : "") + path[k];
    return out;
  }

  void assign(Json& table, const std::vector<std::string>& path, Json value) {
    Json* t = &table;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      Json& next = (*t)[path[k]];
      if (next.is_null()) next = Json::object();
      if (!next.is_object()) fail("key '" + path[k] + "' is already a value, not a table");
      t = &next;
    }
    if (t->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*t)[path.back()] = std::move(value);
  }

  std::string parse_basic_string() {
    expect('"');
    if (peek() == '"' && peek(1) == '"') fail("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = s_[i_++];
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      const char e = s_[i_++];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(std::string("unsupported escape '\\") + e + "'");
      }
    }
    return out;
  }

  std::string parse_literal_string() {
    expect('\'');
    const std::size_t start = i_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++i_;
    if (peek() != '\'') fail("unterminated literal string");
    std::string out = s_.substr(start, i_ - start);
    ++i_;
    return out;
  }

  Json parse_array() {
    expect('[');
    Json arr = Json::array();
    while (true) {
      skip_ws_comments_newlines();
      if (peek() == ']') {
        ++i_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_comments_newlines();
      if (peek() == ',') {
        ++i_;
      } else if (peek() == ']') {
        ++i_;
        return arr;
      } else {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Json parse_inline_table() {
    expect('{');
    Json t = Json::object();
    skip_ws();
    if (peek() == '}') {
      ++i_;
      return t;
    }
    while (true) {
      skip_ws();
      const auto path = parse_key_path();
      skip_ws();
      expect('=');
      skip_ws();
      assign(t, path, parse_value());
      skip_ws();
      if (peek() == ',') {
        ++i_;
      } else if (peek() == '}') {
        ++i_;
        return t;
      } else {
        fail("expected ',' or '}' in inline table");
      }
    }
  }

  Json parse_scalar() {
    const std::size_t start = i_;
    while (!eof() && (bare_char(peek()) || peek() == '.' || peek() == '+')) ++i_;
    std::string tok = s_.substr(start, i_ - start);
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char c : tok) {
      if (c != '_') digits.push_back(c);
    }
    if (digits.empty()) fail("invalid value '" + tok + "'");
    std::string body = digits;
    bool neg = false;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
      neg = body[0] == '-';
      body.erase(0, 1);
    }
    if (body == "inf") return neg ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
    const char* e = digits.data() + digits.size();
    if (!is_float) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec == std::errc() && p == e) return v;
      fail("invalid value '" + tok + "'");
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) fail("invalid value '" + tok + "'");
    return v;
  }

  Json parse_value() {
    switch (peek()) {
      case '"': return parse_basic_string();
      case '\'': return parse_literal_string();
      case '[': return parse_array();
      case '{': return parse_inline_table();
      default: return parse_scalar();
    }
  }

  std::string s_;
  std::string origin_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> defined_tables_;
};

}  // namespace toml_detail

inline nlohmann::json parse_toml(const std::string& text, const std::string& origin = "<config>") {
  return toml_detail::Parser(text, origin).parse_document();
}

/// Parses the right-hand side of a `--set key=value` override. Anything that
/// is not a valid TOML value is taken as a bare string.
inline nlohmann::json parse_toml_value(const std::string& text) {
  try {
    return toml_detail::Parser(text, "--set").parse_single_value();
  } catch (const ConfigError&) {
    return text;
  }
}

inline nlohmann::json load_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str(), path);
}

}  // namespace nct
