#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ssgd {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

// Splits one CSV line on commas; fields in this project never contain quotes.
std::vector<std::string_view> split_csv_line(std::string_view line);

std::string read_text_file(const std::filesystem::path& path);
// Throws std::runtime_error naming the path on failure.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace ssgd
