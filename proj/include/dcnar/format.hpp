#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

namespace dcnar {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

/// Minimal delimiter-separated text: a header row plus data rows, no quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position by name; throws InputError when absent.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::string& path, char delimiter = ',');
double parse_double(std::string_view text, std::string_view context);
long long parse_integer(std::string_view text, std::string_view context);

} // namespace dcnar
