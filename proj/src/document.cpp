#include "subctrl/document.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "subctrl/errors.hpp"

namespace subctrl {

namespace {

class DocumentParser {
 public:
  explicit DocumentParser(std::string_view text) : text_(text) {}

  std::vector<DocSection> run() {
    std::vector<DocSection> sections(1);
    for (;;) {
      skip_blank_lines();
      if (pos_ >= text_.size()) break;
      if (text_[pos_] == '[') {
        ++pos_;
        skip_inline_space();
        std::string name = parse_key();
        skip_inline_space();
        expect(']');
        end_of_line();
        for (const auto& s : sections) {
          if (s.name == name) throw ConfigError("duplicate section [" + name + "]");
        }
        sections.push_back({std::move(name), {}});
        continue;
      }
      std::string key = parse_key();
      skip_inline_space();
      expect('=');
      DocValue value = parse_value();
      end_of_line();
      auto& current = sections.back();
      if (current.find(key) != nullptr) {
        throw ConfigError("duplicate key '" + key + "' in section [" + current.name + "]");
      }
      current.entries.emplace_back(std::move(key), std::move(value));
    }
    return sections;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw SyntaxError(message, pos_); }

  void skip_inline_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  void skip_comment() {
    if (pos_ < text_.size() && text_[pos_] == '#') {
      while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
    }
  }

  // Whitespace, newlines and comments; used inside arrays and between statements.
  void skip_all_space() {
    for (;;) {
      skip_inline_space();
      skip_comment();
      if (pos_ < text_.size() && text_[pos_] == '\n') {
        ++pos_;
        continue;
      }
      return;
    }
  }

  void skip_blank_lines() { skip_all_space(); }

  void end_of_line() {
    skip_inline_space();
    skip_comment();
    if (pos_ < text_.size()) {
      if (text_[pos_] != '\n') fail("expected end of line");
      ++pos_;
    }
  }

  void expect(char ch) {
    if (pos_ >= text_.size() || text_[pos_] != ch) fail(std::string("expected '") + ch + "'");
    ++pos_;
  }

  std::string parse_key() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
            text_[pos_] == '-' || text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  DocValue parse_value() {
    skip_inline_space();
    if (pos_ >= text_.size()) fail("expected a value");
    const char ch = text_[pos_];
    if (ch == '"') return DocValue{parse_string()};
    if (ch == '[') return DocValue{parse_array()};
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return DocValue{true};
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return DocValue{false};
    }
    return DocValue{parse_number()};
  }

  std::string parse_string() {
    expect('"');
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char ch = text_[pos_++];
      if (ch == '\n') fail("unterminated string");
      if (ch == '\\') {
        if (pos_ >= text_.size()) fail("unterminated escape");
        const char esc = text_[pos_++];
        switch (esc) {
          case 'n': ch = '\n'; break;
          case 't': ch = '\t'; break;
          case '"': ch = '"'; break;
          case '\\': ch = '\\'; break;
          default: fail("unknown escape sequence");
        }
      }
      out.push_back(ch);
    }
    expect('"');
    return out;
  }

  DocValue::Array parse_array() {
    expect('[');
    DocValue::Array items;
    skip_all_space();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return items;
    }
    for (;;) {
      skip_all_space();
      items.push_back(parse_value());
      skip_all_space();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        skip_all_space();
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          return items;
        }
        continue;
      }
      expect(']');
      return items;
    }
  }

  double parse_number() {
    const std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            text_[pos_] == 'e' || text_[pos_] == 'E' ||
            ((text_[pos_] == '+' || text_[pos_] == '-') &&
             (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    const char* first = text_.data() + start;
    if (*first == '+') ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, text_.data() + pos_, value);
    if (pos_ == start || ec != std::errc() || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("expected a number, string, boolean or array");
    }
    return value;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

const DocValue* DocSection::find(std::string_view key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

Document Document::parse(std::string_view text) {
  Document doc;
  doc.sections_ = DocumentParser(text).run();
  return doc;
}

const DocSection* Document::section(std::string_view name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

double doc_number(const DocValue& value, const std::string& where) {
  if (!value.is_number()) throw ConfigError("'" + where + "' must be a number");
  return std::get<double>(value.data);
}

long doc_integer(const DocValue& value, const std::string& where) {
  const double v = doc_number(value, where);
  if (v != std::floor(v) || std::abs(v) > 1e15) throw ConfigError("'" + where + "' must be an integer");
  return static_cast<long>(v);
}

bool doc_bool(const DocValue& value, const std::string& where) {
  if (!value.is_bool()) throw ConfigError("'" + where + "' must be true or false");
  return std::get<bool>(value.data);
}

const std::string& doc_string(const DocValue& value, const std::string& where) {
  if (!value.is_string()) throw ConfigError("'" + where + "' must be a quoted string");
  return std::get<std::string>(value.data);
}

const DocValue::Array& doc_array(const DocValue& value, const std::string& where) {
  if (!value.is_array()) throw ConfigError("'" + where + "' must be an array");
  return std::get<DocValue::Array>(value.data);
}

std::vector<double> doc_number_list(const DocValue& value, const std::string& where) {
  std::vector<double> out;
  for (const auto& item : doc_array(value, where)) out.push_back(doc_number(item, where));
  return out;
}

std::vector<std::string> doc_string_list(const DocValue& value, const std::string& where) {
  std::vector<std::string> out;
  for (const auto& item : doc_array(value, where)) out.push_back(doc_string(item, where));
  return out;
}

}  // namespace subctrl
