#include "dcnar/format.hpp"

#include "dcnar/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace dcnar {

std::size_t CsvTable::column(std::string_view name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw InputError("missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

namespace {
std::vector<std::string> split_line(const std::string& line, char delimiter)
{
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == delimiter) {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}
} // namespace

CsvTable read_csv(const std::string& path, char delimiter)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line))
        throw InputError("'" + path + "' is empty");
    table.header = split_line(line, delimiter);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r")
            continue;
        auto fields = split_line(line, delimiter);
        if (fields.size() != table.header.size())
            throw InputError(path + " row " + std::to_string(row) + ": expected " + std::to_string(table.header.size()) +
                             " fields");
        table.rows.push_back(std::move(fields));
    }
    return table;
}

double parse_double(std::string_view text, std::string_view context)
{
    double v = 0.0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size() || !std::isfinite(v))
        throw InputError(std::string(context) + ": '" + std::string(text) + "' is not a number");
    return v;
}

long long parse_integer(std::string_view text, std::string_view context)
{
    long long v = 0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size())
        throw InputError(std::string(context) + ": '" + std::string(text) + "' is not an integer");
    return v;
}

} // namespace dcnar
