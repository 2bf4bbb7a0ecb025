#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace emer::text {

// Unicode NFC composition. Invalid UTF-8 is passed through ICU's
// replacement behaviour (U+FFFD).
std::string nfc(std::string_view utf8);

// Full Unicode lowercase (root locale).
std::string to_lower(std::string_view utf8);

// Strips leading/trailing Unicode whitespace and collapses internal runs of
// whitespace to a single ASCII space.
std::string collapse_whitespace(std::string_view utf8);

bool is_blank(std::string_view utf8);

std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`, so readers see
// either the old content or the new one.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split_lines(std::string_view content);

std::string utc_now_iso8601();

}  // namespace emer::text
