#pragma once

// Small text helpers shared by the key/value and CSV readers.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace respvad {

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// "key = value" with '#' comments; nullopt for blank/comment lines.
std::optional<std::pair<std::string, std::string>> parse_key_value(std::string_view line);

int parse_int(std::string_view s, const std::string& where);
long long parse_int64(std::string_view s, const std::string& where);
double parse_double(std::string_view s, const std::string& where);

// Shortest text that reads back to the same double.
std::string format_real(double v);
// %.9g
std::string format_sig9(double v);

} // namespace respvad
