#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace subctrl {

/// Minimal structured-text document: `[section]` headers, `key = value`
/// assignments and `#` comments. Values are numbers, quoted strings,
/// `true`/`false`, or bracketed (possibly nested, possibly multi-line) arrays.
/// This is the TOML subset used by run configs and field configs.
struct DocValue {
  using Array = std::vector<DocValue>;
  std::variant<bool, double, std::string, Array> data;

  bool is_number() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
};

struct DocSection {
  std::string name;
  std::vector<std::pair<std::string, DocValue>> entries;

  const DocValue* find(std::string_view key) const;
};

class Document {
 public:
  /// Throws SyntaxError (byte offset) on malformed input, ConfigError on
  /// duplicate keys or sections.
  static Document parse(std::string_view text);

  /// Keys before the first header live in the section named "".
  const DocSection* section(std::string_view name) const;
  const std::vector<DocSection>& sections() const { return sections_; }

 private:
  std::vector<DocSection> sections_;
};

// Typed accessors; each throws ConfigError naming `context.key` on type mismatch.
double doc_number(const DocValue& value, const std::string& where);
long doc_integer(const DocValue& value, const std::string& where);
bool doc_bool(const DocValue& value, const std::string& where);
const std::string& doc_string(const DocValue& value, const std::string& where);
const DocValue::Array& doc_array(const DocValue& value, const std::string& where);
std::vector<double> doc_number_list(const DocValue& value, const std::string& where);
std::vector<std::string> doc_string_list(const DocValue& value, const std::string& where);

}  // namespace subctrl
