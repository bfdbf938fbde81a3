#include "dcnar/landmark.hpp"

#include "dcnar/error.hpp"

#include <algorithm>
#include <tuple>

namespace dcnar {

std::string to_string(AtRiskRule rule)
{
    switch (rule) {
    case AtRiskRule::currently_healthy: return "currently_healthy";
    case AtRiskRule::never_failed: return "never_failed";
    }
    return "currently_healthy";
}

AtRiskRule at_risk_rule_from_string(const std::string& text)
{
    if (text == "currently_healthy")
        return AtRiskRule::currently_healthy;
    if (text == "never_failed")
        return AtRiskRule::never_failed;
    throw InputError("unknown at-risk rule '" + text + "'");
}

std::vector<Landmark> landmark_origins(const PanelDataset& data, const FailureLabels& labels,
                                       const LandmarkOptions& options)
{
    if (labels.num_units() != data.num_units() || labels.num_periods() != data.num_periods() ||
        labels.num_indicators() != data.num_indicators())
        throw InputError("failure labels do not match the panel shape");
    if (options.horizon == 0)
        throw InputError("horizon must be at least 1");
    const std::size_t history = std::max<std::size_t>(options.history, 1);
    const std::size_t T = data.num_periods();
    const std::size_t h = options.horizon;

    std::vector<Landmark> out;
    for (std::size_t u = 0; u < data.num_units(); ++u) {
        for (std::size_t k = 0; k < data.num_indicators(); ++k) {
            bool failed_before = false;
            for (std::size_t t = 0; t + h < T; ++t) {
                const bool failed_now = labels.defined(u, t, k) && labels.failed(u, t, k);
                failed_before = failed_before || failed_now;
                const int period = data.period(t);
                if (options.origin_min && period < *options.origin_min)
                    continue;
                if (options.origin_max && period > *options.origin_max)
                    continue;
                if (!data.history_observed(u, t, history))
                    continue;
                if (options.rule == AtRiskRule::currently_healthy ? failed_now : failed_before)
                    continue;
                bool window_observed = true;
                bool outcome = false;
                for (std::size_t j = t + 1; j <= t + h; ++j) {
                    if (!labels.defined(u, j, k)) {
                        window_observed = false;
                        break;
                    }
                    outcome = outcome || labels.failed(u, j, k);
                }
                if (window_observed)
                    out.push_back({u, t, k, outcome});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Landmark& a, const Landmark& b) {
        return std::tie(a.unit, a.position, a.indicator) < std::tie(b.unit, b.position, b.indicator);
    });
    return out;
}

} // namespace dcnar
