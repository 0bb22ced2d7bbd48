#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nrelaggs::csv {

using Record = std::vector<std::string>;

/// Parses RFC-4180 text: comma separated, double-quote escaping, CRLF or LF
/// line endings. A trailing newline does not produce an empty record.
std::vector<Record> parse(std::string_view text);

std::vector<Record> read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote or line break.
std::string escape(std::string_view field);

std::string format_record(const Record& record);

}  // namespace nrelaggs::csv
