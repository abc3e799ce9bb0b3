#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace propen::csv {

// Shortest decimal text that round-trips to the same double.
std::string format(double v);

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

// Strict parse of the whole field; throws InvalidArgument on junk.
double parse_double(std::string_view field);
long parse_long(std::string_view field);

}  // namespace propen::csv
