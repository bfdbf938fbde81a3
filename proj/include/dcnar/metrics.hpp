#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dcnar {

/// Predicted risks in [0,1] paired with binary outcomes.
struct ScoredOutcomes {
    std::vector<double> predictions;
    std::vector<std::uint8_t> outcomes;

    std::size_t size() const { return predictions.size(); }
    std::size_t positives() const;
};

/// Probability that a random positive outranks a random negative; ties count 1/2.
double auroc(const ScoredOutcomes& s);

/// Average precision: sum over distinct score thresholds (descending) of
/// (recall step) x (precision at that threshold). Tied scores form one step.
double auprc(const ScoredOutcomes& s);

double brier(const ScoredOutcomes& s);

/// Equal-width bins on [0,1], half-open [lo, hi) with the top bin closed;
/// empty bins are skipped.
double ece(const ScoredOutcomes& s, std::size_t bins = 10);

struct MetricValues {
    std::optional<double> auroc;
    std::optional<double> auprc;
    double brier = 0.0;
    double ece = 0.0;
    std::size_t count = 0;
    std::size_t positives = 0;
};

MetricValues compute_metrics(const ScoredOutcomes& s, std::size_t bins = 10);

enum class Metric { auroc, auprc, brier, ece };
std::string to_string(Metric m);
inline constexpr Metric all_metrics[] = {Metric::auroc, Metric::auprc, Metric::brier, Metric::ece};
std::optional<double> metric_value(const MetricValues& v, Metric m);
/// Higher is better for AUROC and AUPRC, lower for Brier and ECE.
bool higher_is_better(Metric m);

/// One risk prediction for a (unit, origin, indicator) cell.
struct RiskRecord {
    std::string unit;
    int origin = 0;
    std::string indicator;
    double risk = 0.0;
    std::size_t horizon = 0;
    std::size_t draws = 0; ///< Monte Carlo draws; 0 for analytic baselines
};

using RiskTable = std::vector<RiskRecord>;

void write_risk_table(const std::string& path, const RiskTable& table);
RiskTable read_risk_table(const std::string& path);

/// Observed outcome per (unit, origin, indicator) cell.
struct OutcomeKey {
    std::string unit;
    int origin;
    std::string indicator;
    auto operator<=>(const OutcomeKey&) const = default;
};
using OutcomeMap = std::map<OutcomeKey, bool>;

struct EvalEntry {
    std::string indicator;
    std::string model;
    MetricValues metrics;
};

struct EvalReport {
    std::vector<EvalEntry> entries;
    const EvalEntry* find(const std::string& indicator, const std::string& model) const;
};

/// Per-indicator metrics for one model. Every table row must have an outcome.
std::vector<EvalEntry> evaluate_model(const std::string& model, const RiskTable& table, const OutcomeMap& outcomes,
                                      std::size_t bins = 10);

enum class Verdict { win, loss, tie, undefined };
std::string to_string(Verdict v);

struct Comparison {
    std::string indicator;
    std::string baseline;
    Metric metric;
    std::optional<double> difference; ///< reference minus baseline
    Verdict verdict = Verdict::undefined;
};

struct ComparisonResult {
    std::string reference;
    std::vector<std::string> indicators;
    EvalReport report;
    std::vector<Comparison> comparisons;
};

/// Evaluates every model and compares `reference` against each other model.
/// All tables must cover exactly the same (unit, origin, indicator) cells;
/// otherwise InputError lists the mismatching cells.
ComparisonResult compare_models(const std::string& reference, const std::map<std::string, RiskTable>& tables,
                                const OutcomeMap& outcomes, std::size_t bins = 10);

void write_eval_report_csv(const std::string& path, const EvalReport& report);
void write_comparison_csv(const std::string& path, const ComparisonResult& result);
/// Win/loss matrix: one row per indicator, one column per (metric, baseline).
std::string comparison_matrix_text(const ComparisonResult& result);
/// Long table `indicator,model,metric,value`.
void write_plot_table(const std::string& path, const ComparisonResult& result);

} // namespace dcnar
