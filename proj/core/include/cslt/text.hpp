#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cslt {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Strict parse of a full token; throws ParseError on trailing junk.
double parse_double(std::string_view tok);
long parse_long(std::string_view tok);

std::string to_lower_ascii(std::string_view s);

std::vector<std::string> split_ws(std::string_view s);

// Joins with single spaces.
std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace cslt
