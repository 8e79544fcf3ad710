#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace argmine {

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// RFC 4180-style: quoted fields may contain separators and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line, char sep = ',');
std::string csv_field(std::string_view s, char sep = ',');

// Shortest round-trippable decimal form, locale independent.
std::string format_double(double v);
// Fixed number of decimals, locale independent.
std::string format_fixed(double v, int decimals);

}  // namespace argmine
