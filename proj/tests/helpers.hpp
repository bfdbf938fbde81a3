#pragma once

#include "dcnar/panel.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

namespace testing {

/// Fully observed panel with value f(u, t, k); periods start at `first`.
inline dcnar::PanelDataset make_panel(std::size_t units, std::size_t periods, std::size_t indicators,
                                      const std::function<double(std::size_t, std::size_t, std::size_t)>& f,
                                      int first = 1)
{
    std::vector<std::string> u, k;
    for (std::size_t i = 0; i < units; ++i)
        u.push_back("u" + std::to_string(i));
    for (std::size_t i = 0; i < indicators; ++i)
        k.push_back("k" + std::to_string(i));
    std::vector<double> values(units * periods * indicators);
    for (std::size_t a = 0; a < units; ++a)
        for (std::size_t t = 0; t < periods; ++t)
            for (std::size_t c = 0; c < indicators; ++c)
                values[(a * periods + t) * indicators + c] = f(a, t, c);
    return dcnar::PanelDataset(u, first, periods, k, values, std::vector<std::uint8_t>(values.size(), 1));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("dcnar_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace testing
