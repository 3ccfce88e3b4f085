#pragma once
// Tab-separated records with backslash escaping, so message text may
// contain tabs and newlines. Field order and escapes are fixed; readers
// report 1-based line numbers on malformed input.

#include <string>
#include <string_view>
#include <vector>

#include "autogets/common.hpp"

namespace autogets {

inline std::string tsv_escape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string tsv_unescape(std::string_view field, size_t line_no) {
  std::string out;
  out.reserve(field.size());
  for (size_t i = 0; i < field.size(); ++i) {
    char c = field[i];
    if (c != '\\') {
      out += c;
      continue;
    }
    if (i + 1 >= field.size())
      throw ParseError("parse error line " + std::to_string(line_no) +
                       ": dangling backslash");
    char e = field[++i];
    switch (e) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default:
        throw ParseError("parse error line " + std::to_string(line_no) +
                         ": unknown escape '\\" + std::string(1, e) + "'");
    }
  }
  return out;
}

struct TsvRow {
  size_t line_no = 0;
  std::vector<std::string> fields;  // unescaped
};

// Splits into physical lines ('\n', optional trailing '\r' stripped) and
// unescapes each tab-separated field. Blank lines are skipped; lines whose
// first character is '#' are skipped when skip_comments is set.
inline std::vector<TsvRow> parse_tsv(std::string_view text, bool skip_comments = false) {
  std::vector<TsvRow> rows;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = (nl == std::string_view::npos)
                                ? text.substr(pos)
                                : text.substr(pos, nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (skip_comments && line.front() == '#') continue;
    TsvRow row;
    row.line_no = line_no;
    size_t b = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        row.fields.push_back(tsv_unescape(line.substr(b, i - b), line_no));
        b = i + 1;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string tsv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out += '\t';
    out += tsv_escape(fields[i]);
  }
  out += '\n';
  return out;
}

}  // namespace autogets
