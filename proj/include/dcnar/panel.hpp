#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dcnar {

/// Longitudinal multi-indicator panel: values indexed (unit, time, indicator)
/// with an observation mask. Time positions are consecutive integer periods,
/// so a lag of k positions is a lag of k periods. Immutable after construction.
class PanelDataset {
public:
    PanelDataset() = default;

    /// Validates shapes, finiteness of observed cells, and name uniqueness.
    PanelDataset(std::vector<std::string> units, int first_period, std::size_t num_periods,
                 std::vector<std::string> indicators, std::vector<double> values,
                 std::vector<std::uint8_t> mask);

    std::size_t num_units() const { return units_.size(); }
    std::size_t num_periods() const { return num_periods_; }
    std::size_t num_indicators() const { return indicators_.size(); }

    const std::vector<std::string>& units() const { return units_; }
    const std::vector<std::string>& indicator_names() const { return indicators_; }

    int first_period() const { return first_period_; }
    int last_period() const { return first_period_ + static_cast<int>(num_periods_) - 1; }
    int period(std::size_t t) const { return first_period_ + static_cast<int>(t); }
    std::optional<std::size_t> position(int period) const;
    std::optional<std::size_t> indicator_index(const std::string& name) const;
    std::optional<std::size_t> unit_index(const std::string& name) const;

    std::size_t index(std::size_t u, std::size_t t, std::size_t k) const
    {
        return (u * num_periods_ + t) * indicators_.size() + k;
    }
    double value(std::size_t u, std::size_t t, std::size_t k) const { return values_[index(u, t, k)]; }
    bool observed(std::size_t u, std::size_t t, std::size_t k) const { return mask_[index(u, t, k)] != 0; }

    /// Contiguous view of the n indicator values of unit u at time position t.
    std::span<const double> state(std::size_t u, std::size_t t) const
    {
        return {values_.data() + index(u, t, 0), indicators_.size()};
    }
    /// True when every indicator of unit u is observed at position t.
    bool state_observed(std::size_t u, std::size_t t) const;
    /// True when positions [last - count + 1, last] are all fully observed.
    bool history_observed(std::size_t u, std::size_t last, std::size_t count) const;

    std::size_t observed_count(std::size_t k) const;
    std::vector<double> observed_values(std::size_t k) const;

    const std::vector<double>& values() const { return values_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }

    /// Same shape and mask, new values (for transforms such as normalization).
    PanelDataset with_values(std::vector<double> values) const;
    /// Periods in [from, to] inclusive.
    PanelDataset slice_periods(int from, int to) const;

private:
    std::vector<std::string> units_;
    int first_period_ = 0;
    std::size_t num_periods_ = 0;
    std::vector<std::string> indicators_;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

enum class FailureDirection { below };

struct IndicatorSpec {
    std::string name;
    double threshold = 0.0;
    FailureDirection direction = FailureDirection::below;
    double quantile = 0.2;

    bool is_failure(double value) const { return value <= threshold; }
};

/// Failure indicators F_t per (unit, time, indicator); defined only where observed.
class FailureLabels {
public:
    FailureLabels() = default;
    FailureLabels(std::size_t units, std::size_t periods, std::size_t indicators,
                  std::vector<std::uint8_t> labels, std::vector<std::uint8_t> defined);

    bool defined(std::size_t u, std::size_t t, std::size_t k) const { return defined_[index(u, t, k)] != 0; }
    bool failed(std::size_t u, std::size_t t, std::size_t k) const { return labels_[index(u, t, k)] != 0; }
    std::size_t count(std::size_t k) const;

    std::size_t num_units() const { return units_; }
    std::size_t num_periods() const { return periods_; }
    std::size_t num_indicators() const { return indicators_; }

private:
    std::size_t index(std::size_t u, std::size_t t, std::size_t k) const { return (u * periods_ + t) * indicators_ + k; }

    std::size_t units_ = 0, periods_ = 0, indicators_ = 0;
    std::vector<std::uint8_t> labels_;
    std::vector<std::uint8_t> defined_;
};

struct NormStats {
    std::vector<std::string> indicators;
    std::vector<double> mean;
    std::vector<double> sd;
};

struct LoadOptions {
    char delimiter = ',';
};

/// Long-format records `unit,period,indicator,value` with a header row.
PanelDataset load_panel(std::istream& input, const LoadOptions& options = {});
PanelDataset load_panel(const std::filesystem::path& path, const LoadOptions& options = {});
void write_panel(std::ostream& output, const PanelDataset& data);

/// Train holds periods <= cutoff, test holds periods > cutoff.
std::pair<PanelDataset, PanelDataset> temporal_split(const PanelDataset& data, int cutoff);

/// Linear interpolation between closest ranks (type 7). `sorted` must be ascending.
double empirical_quantile(std::span<const double> sorted, double q);

std::vector<IndicatorSpec> compute_thresholds(const PanelDataset& train, double quantile = 0.2);

FailureLabels label_failures(const PanelDataset& data, const std::vector<IndicatorSpec>& specs);

/// Specs reordered to match the dataset's indicator order.
std::vector<IndicatorSpec> align_specs(const std::vector<std::string>& indicators,
                                       const std::vector<IndicatorSpec>& specs);

NormStats compute_norm_stats(const PanelDataset& stats_from);
PanelDataset normalize(const PanelDataset& data, const NormStats& stats);
std::pair<PanelDataset, NormStats> normalize(const PanelDataset& data, const PanelDataset& stats_from);
PanelDataset denormalize(const PanelDataset& data, const NormStats& stats);

} // namespace dcnar
