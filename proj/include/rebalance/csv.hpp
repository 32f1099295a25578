#pragma once

// Minimal RFC 4180 reader/writer. Quoted fields may contain the delimiter,
// doubled quotes and line breaks.

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rebalance/error.hpp"

namespace rebalance::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

inline std::vector<Record> parse(std::string_view data, char delimiter = ',') {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_started = false;
  std::size_t line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = Record{};
    record_started = false;
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (!record_started) {
      current.line = line;
      record_started = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted) {
        throw ParseError("stray quote inside unquoted field", line);
      }
      in_quotes = true;
      field_was_quoted = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') {
      // CRLF handled on the '\n'
    } else if (c == '\n') {
      end_record();
      ++line;
    } else {
      if (field_was_quoted) {
        throw ParseError("characters after closing quote", line);
      }
      field.push_back(c);
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", current.line);
  if (record_started) end_record();

  // Blank lines carry no record.
  std::erase_if(records, [](const Record& r) {
    return r.fields.size() == 1 && r.fields[0].empty();
  });
  return records;
}

inline bool needs_quoting(std::string_view field, char delimiter) {
  for (char c : field) {
    if (c == delimiter || c == '"' || c == '\n' || c == '\r') return true;
  }
  return !field.empty() && (field.front() == ' ' || field.back() == ' ');
}

inline std::string escape(std::string_view field, char delimiter = ',') {
  if (!needs_quoting(field, delimiter)) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields,
                      char delimiter = ',') {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << delimiter;
    out << escape(fields[i], delimiter);
  }
  out << '\n';
}

}  // namespace rebalance::csv
