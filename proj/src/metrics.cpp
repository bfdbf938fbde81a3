#include "dcnar/metrics.hpp"

#include "dcnar/error.hpp"
#include "dcnar/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace dcnar {

std::size_t ScoredOutcomes::positives() const
{
    return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](std::uint8_t o) { return o != 0; }));
}

namespace {

void check_shape(const ScoredOutcomes& s)
{
    if (s.predictions.size() != s.outcomes.size())
        throw InputError("predictions and outcomes differ in length");
    for (double p : s.predictions)
        if (!std::isfinite(p))
            throw InputError("non-finite prediction");
    for (auto o : s.outcomes)
        if (o > 1)
            throw InputError("outcomes must be 0 or 1");
}

void check_probabilities(const ScoredOutcomes& s)
{
    check_shape(s);
    if (s.size() == 0)
        throw InputError("metric needs at least one prediction");
    for (double p : s.predictions)
        if (p < 0.0 || p > 1.0)
            throw InputError("predicted risk outside [0, 1]");
}

/// Indices sorted by descending score.
std::vector<std::size_t> order_descending(const std::vector<double>& scores)
{
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

} // namespace

double auroc(const ScoredOutcomes& s)
{
    check_shape(s);
    const std::size_t P = s.positives();
    const std::size_t N = s.size() - P;
    if (P == 0 || N == 0)
        throw InputError("AUROC needs at least one positive and one negative outcome");
    const auto idx = order_descending(s.predictions);
    // Twice the Mann-Whitney count, accumulated exactly in integers.
    unsigned long long twice = 0, pos_above = 0;
    for (std::size_t a = 0; a < idx.size();) {
        std::size_t b = a;
        unsigned long long pos = 0, neg = 0;
        while (b < idx.size() && s.predictions[idx[b]] == s.predictions[idx[a]]) {
            (s.outcomes[idx[b]] ? pos : neg) += 1;
            ++b;
        }
        twice += 2 * pos_above * neg + pos * neg;
        pos_above += pos;
        a = b;
    }
    return static_cast<double>(twice) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
}

double auprc(const ScoredOutcomes& s)
{
    check_shape(s);
    const std::size_t P = s.positives();
    if (P == 0)
        throw InputError("AUPRC needs at least one positive outcome");
    const auto idx = order_descending(s.predictions);
    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t a = 0; a < idx.size();) {
        std::size_t b = a;
        while (b < idx.size() && s.predictions[idx[b]] == s.predictions[idx[a]]) {
            (s.outcomes[idx[b]] ? tp : fp) += 1;
            ++b;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(P);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        a = b;
    }
    return ap;
}

double brier(const ScoredOutcomes& s)
{
    check_probabilities(s);
    double ss = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double d = s.predictions[k] - static_cast<double>(s.outcomes[k]);
        ss += d * d;
    }
    return ss / static_cast<double>(s.size());
}

double ece(const ScoredOutcomes& s, std::size_t bins)
{
    check_probabilities(s);
    if (bins == 0)
        throw InputError("ECE needs at least one bin");
    const double B = static_cast<double>(bins);
    std::vector<double> pred_sum(bins, 0.0), event_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double p = s.predictions[k];
        auto b = static_cast<std::size_t>(std::min(std::floor(p * B), B - 1.0));
        // Edges are b / bins; correct floating rounding of p * bins near an edge.
        while (b > 0 && p < static_cast<double>(b) / B)
            --b;
        while (b + 1 < bins && p >= static_cast<double>(b + 1) / B)
            ++b;
        pred_sum[b] += p;
        event_sum[b] += s.outcomes[k];
        ++count[b];
    }
    const double total = static_cast<double>(s.size());
    double out = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0)
            continue;
        const double nb = static_cast<double>(count[b]);
        out += (nb / total) * std::abs(pred_sum[b] / nb - event_sum[b] / nb);
    }
    return out;
}

MetricValues compute_metrics(const ScoredOutcomes& s, std::size_t bins)
{
    MetricValues v;
    v.count = s.size();
    v.positives = s.positives();
    if (v.positives > 0 && v.positives < v.count)
        v.auroc = auroc(s);
    if (v.positives > 0)
        v.auprc = auprc(s);
    v.brier = brier(s);
    v.ece = ece(s, bins);
    return v;
}

std::string to_string(Metric m)
{
    switch (m) {
    case Metric::auroc: return "auroc";
    case Metric::auprc: return "auprc";
    case Metric::brier: return "brier";
    case Metric::ece: return "ece";
    }
    return "";
}

std::optional<double> metric_value(const MetricValues& v, Metric m)
{
    switch (m) {
    case Metric::auroc: return v.auroc;
    case Metric::auprc: return v.auprc;
    case Metric::brier: return v.brier;
    case Metric::ece: return v.ece;
    }
    return std::nullopt;
}

bool higher_is_better(Metric m) { return m == Metric::auroc || m == Metric::auprc; }

void write_risk_table(const std::string& path, const RiskTable& table)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write risk table '" + path + "'");
    out << "unit,origin,indicator,risk,h,M\n";
    for (const auto& r : table)
        out << r.unit << ',' << r.origin << ',' << r.indicator << ',' << format_double(r.risk) << ',' << r.horizon
            << ',' << r.draws << '\n';
}

RiskTable read_risk_table(const std::string& path)
{
    const auto csv = read_csv(path);
    const std::size_t cu = csv.column("unit"), co = csv.column("origin"), ci = csv.column("indicator"),
                      cr = csv.column("risk"), ch = csv.column("h");
    const auto m_it = std::find(csv.header.begin(), csv.header.end(), "M");
    RiskTable table;
    for (std::size_t row = 0; row < csv.rows.size(); ++row) {
        const auto& f = csv.rows[row];
        const std::string ctx = path + " row " + std::to_string(row + 2);
        RiskRecord r;
        r.unit = f[cu];
        r.origin = static_cast<int>(parse_integer(f[co], ctx));
        r.indicator = f[ci];
        r.risk = parse_double(f[cr], ctx);
        r.horizon = static_cast<std::size_t>(parse_integer(f[ch], ctx));
        if (m_it != csv.header.end())
            r.draws = static_cast<std::size_t>(parse_integer(f[static_cast<std::size_t>(m_it - csv.header.begin())], ctx));
        if (!(r.risk >= 0.0 && r.risk <= 1.0))
            throw InputError(ctx + ": risk outside [0, 1]");
        table.push_back(std::move(r));
    }
    return table;
}

const EvalEntry* EvalReport::find(const std::string& indicator, const std::string& model) const
{
    for (const auto& e : entries)
        if (e.indicator == indicator && e.model == model)
            return &e;
    return nullptr;
}

std::vector<EvalEntry> evaluate_model(const std::string& model, const RiskTable& table, const OutcomeMap& outcomes,
                                      std::size_t bins)
{
    std::map<std::string, ScoredOutcomes> by_indicator;
    std::vector<std::string> order;
    for (const auto& r : table) {
        auto it = outcomes.find({r.unit, r.origin, r.indicator});
        if (it == outcomes.end())
            throw InputError("no observed outcome for (" + r.unit + ", " + std::to_string(r.origin) + ", " +
                             r.indicator + ") in model '" + model + "'");
        auto [slot, inserted] = by_indicator.try_emplace(r.indicator);
        if (inserted)
            order.push_back(r.indicator);
        slot->second.predictions.push_back(r.risk);
        slot->second.outcomes.push_back(it->second ? 1 : 0);
    }
    std::vector<EvalEntry> out;
    for (const auto& name : order)
        out.push_back({name, model, compute_metrics(by_indicator[name], bins)});
    return out;
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::win: return "win";
    case Verdict::loss: return "loss";
    case Verdict::tie: return "tie";
    case Verdict::undefined: return "undefined";
    }
    return "";
}

namespace {

std::string describe(const OutcomeKey& k)
{
    return "(" + k.unit + ", " + std::to_string(k.origin) + ", " + k.indicator + ")";
}

std::set<OutcomeKey> coverage(const std::string& model, const RiskTable& table)
{
    std::set<OutcomeKey> keys;
    for (const auto& r : table)
        if (!keys.insert({r.unit, r.origin, r.indicator}).second)
            throw InputError("model '" + model + "' has a duplicate row " + describe({r.unit, r.origin, r.indicator}));
    return keys;
}

} // namespace

ComparisonResult compare_models(const std::string& reference, const std::map<std::string, RiskTable>& tables,
                                const OutcomeMap& outcomes, std::size_t bins)
{
    auto ref_it = tables.find(reference);
    if (ref_it == tables.end())
        throw InputError("reference model '" + reference + "' has no risk table");

    const auto ref_keys = coverage(reference, ref_it->second);
    std::ostringstream mismatch;
    std::size_t mismatches = 0;
    for (const auto& [name, table] : tables) {
        if (name == reference)
            continue;
        const auto keys = coverage(name, table);
        auto note = [&](const OutcomeKey& k, const std::string& where) {
            if (mismatches < 20)
                mismatch << "\n  " << describe(k) << " missing from " << where;
            ++mismatches;
        };
        for (const auto& k : ref_keys)
            if (!keys.count(k))
                note(k, name);
        for (const auto& k : keys)
            if (!ref_keys.count(k))
                note(k, reference);
    }
    if (mismatches > 0)
        throw InputError("risk tables differ in coverage (" + std::to_string(mismatches) + " cells):" + mismatch.str());

    ComparisonResult result;
    result.reference = reference;
    for (const auto& r : ref_it->second)
        if (std::find(result.indicators.begin(), result.indicators.end(), r.indicator) == result.indicators.end())
            result.indicators.push_back(r.indicator);

    auto add = [&](const std::string& name, const RiskTable& table) {
        for (auto& e : evaluate_model(name, table, outcomes, bins))
            result.report.entries.push_back(std::move(e));
    };
    add(reference, ref_it->second);
    for (const auto& [name, table] : tables)
        if (name != reference)
            add(name, table);

    for (const auto& indicator : result.indicators) {
        const EvalEntry* ref = result.report.find(indicator, reference);
        for (const auto& [name, table] : tables) {
            if (name == reference)
                continue;
            const EvalEntry* other = result.report.find(indicator, name);
            for (Metric m : all_metrics) {
                Comparison c{indicator, name, m, std::nullopt, Verdict::undefined};
                const auto a = metric_value(ref->metrics, m);
                const auto b = other ? metric_value(other->metrics, m) : std::nullopt;
                if (a && b) {
                    c.difference = *a - *b;
                    if (*a == *b)
                        c.verdict = Verdict::tie;
                    else
                        c.verdict = (higher_is_better(m) ? *a > *b : *a < *b) ? Verdict::win : Verdict::loss;
                }
                result.comparisons.push_back(c);
            }
        }
    }
    return result;
}

namespace {
std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }
} // namespace

void write_eval_report_csv(const std::string& path, const EvalReport& report)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write '" + path + "'");
    out << "indicator,model,auroc,auprc,brier,ece,n,positives\n";
    for (const auto& e : report.entries)
        out << e.indicator << ',' << e.model << ',' << optional_text(e.metrics.auroc) << ','
            << optional_text(e.metrics.auprc) << ',' << format_double(e.metrics.brier) << ','
            << format_double(e.metrics.ece) << ',' << e.metrics.count << ',' << e.metrics.positives << '\n';
}

void write_comparison_csv(const std::string& path, const ComparisonResult& result)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write '" + path + "'");
    out << "indicator,reference,baseline,metric,difference,win\n";
    for (const auto& c : result.comparisons) {
        out << c.indicator << ',' << result.reference << ',' << c.baseline << ',' << to_string(c.metric) << ','
            << optional_text(c.difference) << ',';
        switch (c.verdict) {
        case Verdict::win: out << 1; break;
        case Verdict::loss: out << 0; break;
        case Verdict::tie: out << "tie"; break;
        case Verdict::undefined: out << "NA"; break;
        }
        out << '\n';
    }
}

std::string comparison_matrix_text(const ComparisonResult& result)
{
    std::vector<std::pair<std::string, Metric>> columns;
    for (const auto& c : result.comparisons) {
        std::pair<std::string, Metric> key{c.baseline, c.metric};
        if (std::find(columns.begin(), columns.end(), key) == columns.end())
            columns.push_back(key);
    }
    std::size_t width = 9;
    for (const auto& name : result.indicators)
        width = std::max(width, name.size());
    std::ostringstream out;
    out << "# 1 = " << result.reference << " better, 0 = worse, = tie, . undefined\n";
    out << std::string(width, ' ');
    for (const auto& [base, m] : columns) {
        const std::string label = to_string(m) + ":" + base;
        out << "  " << label;
    }
    out << '\n';
    for (const auto& name : result.indicators) {
        out << name << std::string(width - name.size(), ' ');
        for (const auto& [base, m] : columns) {
            const std::string label = to_string(m) + ":" + base;
            char mark = '.';
            for (const auto& c : result.comparisons)
                if (c.indicator == name && c.baseline == base && c.metric == m)
                    mark = c.verdict == Verdict::win ? '1' : c.verdict == Verdict::loss ? '0' : c.verdict == Verdict::tie ? '=' : '.';
            out << "  " << std::string(label.size() - 1, ' ') << mark;
        }
        out << '\n';
    }
    return out.str();
}

void write_plot_table(const std::string& path, const ComparisonResult& result)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write '" + path + "'");
    out << "indicator,model,metric,value\n";
    for (const auto& e : result.report.entries)
        for (Metric m : all_metrics) {
            const auto v = metric_value(e.metrics, m);
            if (v)
                out << e.indicator << ',' << e.model << ',' << to_string(m) << ',' << format_double(*v) << '\n';
        }
}

} // namespace dcnar
