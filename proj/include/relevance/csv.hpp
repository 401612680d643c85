// SPDX-License-Identifier: Apache-2.0
//
// Minimal RFC 4180 reader/writer. Quoted fields may contain commas, doubled
// quotes and line breaks; records end at LF or CRLF.
#pragma once

#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace relevance::csv {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Record {
  std::size_t line = 0;  // 1-based line on which the record starts
  std::vector<std::string> fields;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {
    if (in_.peek() == 0xEF) {
      char bom[3];
      in_.read(bom, 3);
      if (std::string_view(bom, static_cast<std::size_t>(in_.gcount())) != "\xEF\xBB\xBF")
        throw ParseError(1, "unexpected bytes at start of file");
    }
  }

  /// Next record, or nullopt at end of input. Blank lines are skipped.
  std::optional<Record> next() {
    while (true) {
      if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;
      Record r;
      r.line = line_;
      std::string field;
      bool quoted = false, after_quote = false, any = false;
      for (;;) {
        int ci = in_.get();
        if (ci == std::char_traits<char>::eof()) {
          if (quoted) throw ParseError(r.line, "unterminated quoted field");
          break;
        }
        char c = static_cast<char>(ci);
        any = true;
        if (quoted) {
          if (c == '"') {
            if (in_.peek() == '"') {
              in_.get();
              field.push_back('"');
            } else {
              quoted = false;
              after_quote = true;
            }
          } else {
            if (c == '\n') ++line_;
            field.push_back(c);
          }
          continue;
        }
        if (c == ',') {
          r.fields.push_back(std::move(field));
          field.clear();
          after_quote = false;
        } else if (c == '\r' && in_.peek() == '\n') {
          continue;
        } else if (c == '\n') {
          ++line_;
          break;
        } else if (c == '"') {
          if (!field.empty() || after_quote) throw ParseError(line_, "stray quote inside unquoted field");
          quoted = true;
        } else {
          if (after_quote) throw ParseError(line_, "text after closing quote");
          field.push_back(c);
        }
      }
      r.fields.push_back(std::move(field));
      if (!any || (r.fields.size() == 1 && r.fields[0].empty())) continue;
      return r;
    }
  }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
};

inline std::vector<Record> read_all(std::istream& in) {
  Reader r(in);
  std::vector<Record> out;
  while (auto rec = r.next()) out.push_back(std::move(*rec));
  return out;
}

/// Quotes a field only when needed.
inline std::string escape(std::string_view f) {
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace relevance::csv
