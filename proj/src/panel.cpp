#include "dcnar/panel.hpp"

#include "dcnar/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "dcnar/format.hpp"

namespace dcnar {

PanelDataset::PanelDataset(std::vector<std::string> units, int first_period, std::size_t num_periods,
                           std::vector<std::string> indicators, std::vector<double> values,
                           std::vector<std::uint8_t> mask)
    : units_(std::move(units)), first_period_(first_period), num_periods_(num_periods),
      indicators_(std::move(indicators)), values_(std::move(values)), mask_(std::move(mask))
{
    if (indicators_.empty())
        throw InputError("panel has no indicators");
    const std::size_t cells = units_.size() * num_periods_ * indicators_.size();
    if (values_.size() != cells || mask_.size() != cells)
        throw InputError("panel tensor size does not match units x periods x indicators");
    std::set<std::string> seen;
    for (const auto& name : indicators_)
        if (!seen.insert(name).second)
            throw InputError("duplicate indicator name '" + name + "'");
    seen.clear();
    for (const auto& name : units_)
        if (!seen.insert(name).second)
            throw InputError("duplicate unit identifier '" + name + "'");
    for (std::size_t c = 0; c < cells; ++c) {
        if (mask_[c] && !std::isfinite(values_[c]))
            throw InputError("non-finite observed value in panel");
        if (!mask_[c])
            values_[c] = 0.0;
    }
}

std::optional<std::size_t> PanelDataset::position(int p) const
{
    if (p < first_period_ || p > last_period())
        return std::nullopt;
    return static_cast<std::size_t>(p - first_period_);
}

std::optional<std::size_t> PanelDataset::indicator_index(const std::string& name) const
{
    auto it = std::find(indicators_.begin(), indicators_.end(), name);
    if (it == indicators_.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - indicators_.begin());
}

std::optional<std::size_t> PanelDataset::unit_index(const std::string& name) const
{
    auto it = std::find(units_.begin(), units_.end(), name);
    if (it == units_.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - units_.begin());
}

bool PanelDataset::state_observed(std::size_t u, std::size_t t) const
{
    const auto* m = mask_.data() + index(u, t, 0);
    return std::all_of(m, m + indicators_.size(), [](std::uint8_t v) { return v != 0; });
}

bool PanelDataset::history_observed(std::size_t u, std::size_t last, std::size_t count) const
{
    if (count == 0)
        return true;
    if (last + 1 < count || last >= num_periods_)
        return false;
    for (std::size_t t = last + 1 - count; t <= last; ++t)
        if (!state_observed(u, t))
            return false;
    return true;
}

std::size_t PanelDataset::observed_count(std::size_t k) const
{
    std::size_t count = 0;
    for (std::size_t u = 0; u < num_units(); ++u)
        for (std::size_t t = 0; t < num_periods_; ++t)
            count += observed(u, t, k);
    return count;
}

std::vector<double> PanelDataset::observed_values(std::size_t k) const
{
    std::vector<double> out;
    for (std::size_t u = 0; u < num_units(); ++u)
        for (std::size_t t = 0; t < num_periods_; ++t)
            if (observed(u, t, k))
                out.push_back(value(u, t, k));
    return out;
}

PanelDataset PanelDataset::with_values(std::vector<double> values) const
{
    return PanelDataset(units_, first_period_, num_periods_, indicators_, std::move(values), mask_);
}

PanelDataset PanelDataset::slice_periods(int from, int to) const
{
    from = std::max(from, first_period_);
    to = std::min(to, last_period());
    if (from > to)
        throw InputError("empty period slice");
    const std::size_t t0 = static_cast<std::size_t>(from - first_period_);
    const std::size_t len = static_cast<std::size_t>(to - from + 1);
    const std::size_t n = indicators_.size();
    std::vector<double> values(units_.size() * len * n);
    std::vector<std::uint8_t> mask(values.size());
    for (std::size_t u = 0; u < units_.size(); ++u) {
        const std::size_t src = index(u, t0, 0);
        const std::size_t dst = u * len * n;
        std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(src), len * n, values.begin() + static_cast<std::ptrdiff_t>(dst));
        std::copy_n(mask_.begin() + static_cast<std::ptrdiff_t>(src), len * n, mask.begin() + static_cast<std::ptrdiff_t>(dst));
    }
    return PanelDataset(units_, from, len, indicators_, std::move(values), std::move(mask));
}

FailureLabels::FailureLabels(std::size_t units, std::size_t periods, std::size_t indicators,
                             std::vector<std::uint8_t> labels, std::vector<std::uint8_t> defined)
    : units_(units), periods_(periods), indicators_(indicators), labels_(std::move(labels)), defined_(std::move(defined))
{
    if (labels_.size() != units * periods * indicators || defined_.size() != labels_.size())
        throw InputError("failure label tensor has the wrong size");
}

std::size_t FailureLabels::count(std::size_t k) const
{
    std::size_t c = 0;
    for (std::size_t u = 0; u < units_; ++u)
        for (std::size_t t = 0; t < periods_; ++t)
            c += defined(u, t, k) && failed(u, t, k);
    return c;
}

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

struct Record {
    std::size_t unit;
    int period;
    std::size_t indicator;
    double value;
};

} // namespace

PanelDataset load_panel(std::istream& input, const LoadOptions& options)
{
    std::string line;
    if (!std::getline(input, line))
        throw InputError("panel input is empty");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
        line.erase(0, 3); // UTF-8 BOM
    const auto header = split_fields(line, options.delimiter);
    if (header.size() != 4 || header[0] != "unit" || header[1] != "period" || header[2] != "indicator" ||
        header[3] != "value")
        throw InputError("panel header must be unit,period,indicator,value");

    std::vector<std::string> units, indicators;
    std::unordered_map<std::string, std::size_t> unit_ids, indicator_ids;
    std::vector<Record> records;
    std::set<std::tuple<std::size_t, int, std::size_t>> keys;

    std::size_t row = 1;
    while (std::getline(input, line)) {
        ++row;
        if (trim(line).empty())
            continue;
        const auto fields = split_fields(line, options.delimiter);
        if (fields.size() != 4)
            throw InputError("row " + std::to_string(row) + ": expected 4 fields, found " + std::to_string(fields.size()));

        int period = 0;
        auto pr = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), period);
        if (pr.ec != std::errc() || pr.ptr != fields[1].data() + fields[1].size())
            throw InputError("row " + std::to_string(row) + ": period '" + std::string(fields[1]) + "' is not an integer");

        double value = 0.0;
        auto vr = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), value);
        if (fields[3].empty() || vr.ec != std::errc() || vr.ptr != fields[3].data() + fields[3].size() ||
            !std::isfinite(value))
            throw InputError("row " + std::to_string(row) + ": value '" + std::string(fields[3]) + "' is not numeric");

        const std::string unit_name(fields[0]);
        const std::string indicator_name(fields[2]);
        auto [uit, unew] = unit_ids.try_emplace(unit_name, units.size());
        if (unew)
            units.push_back(unit_name);
        auto [iit, inew] = indicator_ids.try_emplace(indicator_name, indicators.size());
        if (inew)
            indicators.push_back(indicator_name);

        if (!keys.emplace(uit->second, period, iit->second).second)
            throw InputError("row " + std::to_string(row) + ": duplicate record (" + unit_name + ", " +
                             std::to_string(period) + ", " + indicator_name + ")");
        records.push_back({uit->second, period, iit->second, value});
    }
    if (records.empty())
        throw InputError("panel input has no records");

    const auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                              [](const Record& a, const Record& b) { return a.period < b.period; });
    const int first = lo->period;
    const std::size_t periods = static_cast<std::size_t>(hi->period - first + 1);
    const std::size_t n = indicators.size();
    std::vector<double> values(units.size() * periods * n, 0.0);
    std::vector<std::uint8_t> mask(values.size(), 0);
    for (const auto& r : records) {
        const std::size_t c = (r.unit * periods + static_cast<std::size_t>(r.period - first)) * n + r.indicator;
        values[c] = r.value;
        mask[c] = 1;
    }
    return PanelDataset(std::move(units), first, periods, std::move(indicators), std::move(values), std::move(mask));
}

PanelDataset load_panel(const std::filesystem::path& path, const LoadOptions& options)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open panel file '" + path.string() + "'");
    return load_panel(in, options);
}

void write_panel(std::ostream& output, const PanelDataset& data)
{
    output << "unit,period,indicator,value\n";
    for (std::size_t u = 0; u < data.num_units(); ++u)
        for (std::size_t t = 0; t < data.num_periods(); ++t)
            for (std::size_t k = 0; k < data.num_indicators(); ++k)
                if (data.observed(u, t, k))
                    output << data.units()[u] << ',' << data.period(t) << ',' << data.indicator_names()[k] << ','
                           << format_double(data.value(u, t, k)) << '\n';
}

std::pair<PanelDataset, PanelDataset> temporal_split(const PanelDataset& data, int cutoff)
{
    if (cutoff < data.first_period() || cutoff >= data.last_period())
        throw InputError("split cutoff " + std::to_string(cutoff) + " must lie in [" +
                         std::to_string(data.first_period()) + ", " + std::to_string(data.last_period() - 1) + "]");
    return {data.slice_periods(data.first_period(), cutoff), data.slice_periods(cutoff + 1, data.last_period())};
}

double empirical_quantile(std::span<const double> sorted, double q)
{
    if (sorted.empty())
        throw InputError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0))
        throw InputError("quantile level must lie in [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size())
        return sorted[lo];
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::vector<IndicatorSpec> compute_thresholds(const PanelDataset& train, double quantile)
{
    if (!(quantile > 0.0 && quantile < 1.0))
        throw InputError("threshold quantile must lie in (0, 1)");
    std::vector<IndicatorSpec> specs;
    for (std::size_t k = 0; k < train.num_indicators(); ++k) {
        auto values = train.observed_values(k);
        if (values.size() < 5)
            throw InputError("indicator '" + train.indicator_names()[k] + "' has " + std::to_string(values.size()) +
                             " observed training values; at least 5 are required");
        std::sort(values.begin(), values.end());
        specs.push_back({train.indicator_names()[k], empirical_quantile(values, quantile), FailureDirection::below, quantile});
    }
    return specs;
}

std::vector<IndicatorSpec> align_specs(const std::vector<std::string>& indicators,
                                       const std::vector<IndicatorSpec>& specs)
{
    std::map<std::string, const IndicatorSpec*> by_name;
    for (const auto& s : specs) {
        if (std::find(indicators.begin(), indicators.end(), s.name) == indicators.end())
            throw InputError("threshold given for unknown indicator '" + s.name + "'");
        by_name[s.name] = &s;
    }
    std::vector<IndicatorSpec> out;
    for (const auto& name : indicators) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw InputError("no threshold for indicator '" + name + "'");
        out.push_back(*it->second);
    }
    return out;
}

FailureLabels label_failures(const PanelDataset& data, const std::vector<IndicatorSpec>& specs)
{
    const auto aligned = align_specs(data.indicator_names(), specs);
    const std::size_t n = data.num_indicators();
    std::vector<std::uint8_t> labels(data.values().size(), 0);
    std::vector<std::uint8_t> defined(data.mask());
    for (std::size_t c = 0; c < labels.size(); ++c)
        if (defined[c])
            labels[c] = aligned[c % n].is_failure(data.values()[c]);
    return FailureLabels(data.num_units(), data.num_periods(), n, std::move(labels), std::move(defined));
}

NormStats compute_norm_stats(const PanelDataset& stats_from)
{
    NormStats stats;
    stats.indicators = stats_from.indicator_names();
    for (std::size_t k = 0; k < stats_from.num_indicators(); ++k) {
        const auto values = stats_from.observed_values(k);
        const auto& name = stats_from.indicator_names()[k];
        if (values.size() < 2)
            throw InputError("indicator '" + name + "' needs at least 2 observed values for normalization");
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values)
            ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
            throw InputError("indicator '" + name + "' has zero variance and cannot be normalized");
        stats.mean.push_back(mean);
        stats.sd.push_back(sd);
    }
    return stats;
}

namespace {
void check_stats(const PanelDataset& data, const NormStats& stats)
{
    if (stats.indicators != data.indicator_names())
        throw InputError("normalization statistics do not match the panel's indicators");
}
} // namespace

PanelDataset normalize(const PanelDataset& data, const NormStats& stats)
{
    check_stats(data, stats);
    const std::size_t n = data.num_indicators();
    std::vector<double> values(data.values());
    for (std::size_t c = 0; c < values.size(); ++c)
        if (data.mask()[c])
            values[c] = (values[c] - stats.mean[c % n]) / stats.sd[c % n];
    return data.with_values(std::move(values));
}

std::pair<PanelDataset, NormStats> normalize(const PanelDataset& data, const PanelDataset& stats_from)
{
    auto stats = compute_norm_stats(stats_from);
    return {normalize(data, stats), std::move(stats)};
}

PanelDataset denormalize(const PanelDataset& data, const NormStats& stats)
{
    check_stats(data, stats);
    const std::size_t n = data.num_indicators();
    std::vector<double> values(data.values());
    for (std::size_t c = 0; c < values.size(); ++c)
        if (data.mask()[c])
            values[c] = values[c] * stats.sd[c % n] + stats.mean[c % n];
    return data.with_values(std::move(values));
}

} // namespace dcnar
