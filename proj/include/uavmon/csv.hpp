#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace uavmon::csv {

// Splits one line on commas. No quoting support: none of our formats need it.
std::vector<std::string_view> split(std::string_view line, char delimiter = ',');

// Strict full-field parse; accepts "inf"/"-inf"/"nan". Throws ParseError.
double parse_double(std::string_view field, std::size_t line = 0);
long long parse_int(std::string_view field, std::size_t line = 0);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

std::string_view trim(std::string_view s);

// getline that also strips a trailing '\r'.
bool read_line(std::istream& in, std::string& line);

}  // namespace uavmon::csv
