#include "respvad/text.hpp"

#include "respvad/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace respvad {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(s.substr(start)));
            break;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::optional<std::pair<std::string, std::string>> parse_key_value(std::string_view line) {
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) {
        line = line.substr(0, hash);
    }
    const std::string body = trim(line);
    if (body.empty()) {
        return std::nullopt;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
        throw Error("expected 'key = value', got '" + body + "'");
    }
    return std::make_pair(trim(std::string_view(body).substr(0, eq)),
                          trim(std::string_view(body).substr(eq + 1)));
}

int parse_int(std::string_view s, const std::string& where) {
    const long long v = parse_int64(s, where);
    if (v < -2147483647LL || v > 2147483647LL) {
        throw Error(where + ": integer out of range '" + std::string(s) + "'");
    }
    return static_cast<int>(v);
}

long long parse_int64(std::string_view s, const std::string& where) {
    const std::string t = trim(s);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw Error(where + ": expected integer, got '" + t + "'");
    }
    return v;
}

double parse_double(std::string_view s, const std::string& where) {
    const std::string t = trim(s);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
        throw Error(where + ": expected number, got '" + t + "'");
    }
    return v;
}

std::string format_real(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

std::string format_sig9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace respvad
