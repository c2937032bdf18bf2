#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hierind::csv {

/// One parsed record plus the 1-based line it started on.
struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Reads comma-separated records. Double-quoted fields may contain commas,
/// doubled quotes and newlines. Blank lines are skipped. A trailing '\r' is
/// stripped.
std::vector<Record> read_all(std::istream& in);
std::vector<Record> read_file(const std::string& path);

/// Quotes a field only if it needs quoting.
std::string escape(std::string_view field);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Strict double parse: the whole field must be consumed.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

}  // namespace hierind::csv
