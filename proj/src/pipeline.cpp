#include "dcnar/pipeline.hpp"

#include "dcnar/error.hpp"
#include "dcnar/format.hpp"
#include "dcnar/log.hpp"
#include "dcnar/risk.hpp"

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

namespace dcnar {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& file)
{
    return (fs::path(dir) / file).string();
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw InputError("cannot create output directory '" + dir + "': " + ec.message());
}

// Reads `key` of `section` into `target`, rejecting wrong types.
template <class T>
void read(const Json& section, const char* key, T& target, const std::string& where)
{
    if (!section.contains(key))
        return;
    try {
        target = section.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError("config field '" + where + key + "' has the wrong type");
    }
}

void reject_unknown(const Json& section, std::initializer_list<const char*> known, const std::string& where)
{
    if (!section.is_object())
        throw InputError("config section '" + where + "' must be an object");
    for (const auto& item : section.items()) {
        bool ok = false;
        for (const char* k : known)
            ok = ok || item.key() == k;
        if (!ok)
            throw InputError("unknown config field '" + where + item.key() + "'");
    }
}

Json section(const Json& doc, const char* key)
{
    return doc.contains(key) ? doc.at(key) : Json::object();
}

BinarizeRule binarize_rule(const RunConfig::Discovery& d)
{
    BinarizeRule rule;
    if (d.binarize == "top_fraction")
        rule.kind = BinarizeRule::Kind::top_fraction;
    else if (d.binarize == "top_k")
        rule.kind = BinarizeRule::Kind::top_k;
    else
        rule.kind = BinarizeRule::Kind::absolute;
    rule.fraction = d.edge_fraction;
    rule.k = d.edge_k;
    rule.threshold = d.edge_threshold;
    return rule;
}

void write_config(const RunConfig& config, const std::string& command)
{
    ensure_dir(config.out);
    write_json(join(config.out, "config_" + command + ".json"), to_json(config));
}

Json metric_json(const MetricValues& v)
{
    auto opt = [](const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); };
    return {{"auroc", opt(v.auroc)}, {"auprc", opt(v.auprc)}, {"brier", v.brier},
            {"ece", v.ece},          {"count", v.count},      {"positives", v.positives}};
}

} // namespace

// ---------------------------------------------------------------- config

std::string RunConfig::graph_path() const
{
    return dynamics.graph.empty() ? join(out, "adjacency.json") : dynamics.graph;
}

std::string RunConfig::model_path() const
{
    return risk.model.empty() ? join(out, "model.json") : risk.model;
}

std::map<std::string, std::string> RunConfig::table_paths() const
{
    if (!evaluation.tables.empty())
        return evaluation.tables;
    return {{"dcnar", join(out, "risk_dcnar.csv")},
            {"cox", join(out, "risk_cox.csv")},
            {"hazard", join(out, "risk_hazard.csv")}};
}

void RunConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw InputError("invalid config: " + msg); };
    if (!(quantile > 0.0 && quantile < 1.0))
        fail("quantile must lie in (0, 1)");
    if (workers == 0)
        fail("workers must be at least 1");
    if (out.empty())
        fail("out must name a directory");
    const auto& d = discovery;
    if (d.max_lag == 0 || d.hidden == 0)
        fail("discovery.max_lag and discovery.hidden must be at least 1");
    if (d.lambda_grid.empty())
        fail("discovery.lambda_grid must not be empty");
    for (double l : d.lambda_grid)
        if (!(l >= 0.0) || !std::isfinite(l))
            fail("discovery.lambda_grid values must be finite and nonnegative");
    if (!(d.output_ridge >= 0.0) || !(d.tolerance > 0.0) || d.max_epochs == 0)
        fail("discovery.output_ridge, tolerance and max_epochs must be positive");
    if (d.binarize != "top_fraction" && d.binarize != "top_k" && d.binarize != "absolute")
        fail("discovery.binarize must be top_fraction, top_k or absolute");
    if (!(d.edge_fraction >= 0.0 && d.edge_fraction <= 1.0))
        fail("discovery.edge_fraction must lie in [0, 1]");
    if (dynamics.lags == 0 || dynamics.basis_size == 0 || !(dynamics.ridge >= 0.0))
        fail("dynamics.lags and dynamics.basis_size must be at least 1 and dynamics.ridge nonnegative");
    if (risk.horizon == 0 || risk.draws == 0)
        fail("risk.horizon and risk.draws must be at least 1");
    noise_mode_from_string(risk.noise);
    at_risk_rule_from_string(risk.at_risk);
    if (!(baselines.hazard_ridge >= 0.0))
        fail("baselines.hazard_ridge must be nonnegative");
    cox_horizon_mode_from_string(baselines.cox_mode);
    if (evaluation.bins == 0)
        fail("evaluation.bins must be at least 1");
    const auto tables = table_paths();
    if (!tables.count(evaluation.reference))
        fail("evaluation.reference '" + evaluation.reference + "' is not among evaluation.tables");
    if (tables.size() < 2)
        fail("evaluation needs at least two risk tables");
    regime_from_string(synthetic.regime);
    if (synthetic.regime == "custom")
        fail("synthetic.regime must name a template");
    if (synthetic.indicators < 3 || synthetic.units == 0 || synthetic.periods < 5 || synthetic.burn_in < 10)
        fail("synthetic needs indicators >= 3, units >= 1, periods >= 5 and burn_in >= 10");
    if (!(synthetic.noise_sd >= 0.0) || !(synthetic.unit_offset_sd >= 0.0))
        fail("synthetic noise parameters must be nonnegative");
}

RunConfig config_from_json(const Json& doc)
{
    RunConfig c;
    if (!doc.is_object())
        throw InputError("config must be a JSON object");
    reject_unknown(doc,
                   {"data", "cutoff", "quantile", "out", "seed", "workers", "discovery", "dynamics", "risk", "baselines",
                    "evaluation", "synthetic"},
                   "");
    read(doc, "data", c.data, "");
    if (doc.contains("cutoff") && !doc.at("cutoff").is_null()) {
        int cutoff = 0;
        read(doc, "cutoff", cutoff, "");
        c.cutoff = cutoff;
    }
    read(doc, "quantile", c.quantile, "");
    read(doc, "out", c.out, "");
    read(doc, "seed", c.seed, "");
    read(doc, "workers", c.workers, "");

    const Json d = section(doc, "discovery");
    reject_unknown(d,
                   {"max_lag", "hidden", "lambda_grid", "output_ridge", "max_epochs", "tolerance", "validation_periods",
                    "binarize", "edge_fraction", "edge_k", "edge_threshold"},
                   "discovery.");
    read(d, "max_lag", c.discovery.max_lag, "discovery.");
    read(d, "hidden", c.discovery.hidden, "discovery.");
    read(d, "lambda_grid", c.discovery.lambda_grid, "discovery.");
    read(d, "output_ridge", c.discovery.output_ridge, "discovery.");
    read(d, "max_epochs", c.discovery.max_epochs, "discovery.");
    read(d, "tolerance", c.discovery.tolerance, "discovery.");
    read(d, "validation_periods", c.discovery.validation_periods, "discovery.");
    read(d, "binarize", c.discovery.binarize, "discovery.");
    read(d, "edge_fraction", c.discovery.edge_fraction, "discovery.");
    read(d, "edge_k", c.discovery.edge_k, "discovery.");
    read(d, "edge_threshold", c.discovery.edge_threshold, "discovery.");

    const Json y = section(doc, "dynamics");
    reject_unknown(y, {"graph", "lags", "basis_size", "ridge"}, "dynamics.");
    read(y, "graph", c.dynamics.graph, "dynamics.");
    read(y, "lags", c.dynamics.lags, "dynamics.");
    read(y, "basis_size", c.dynamics.basis_size, "dynamics.");
    read(y, "ridge", c.dynamics.ridge, "dynamics.");

    const Json r = section(doc, "risk");
    reject_unknown(r, {"model", "horizon", "draws", "noise", "at_risk"}, "risk.");
    read(r, "model", c.risk.model, "risk.");
    read(r, "horizon", c.risk.horizon, "risk.");
    read(r, "draws", c.risk.draws, "risk.");
    read(r, "noise", c.risk.noise, "risk.");
    read(r, "at_risk", c.risk.at_risk, "risk.");

    const Json b = section(doc, "baselines");
    reject_unknown(b, {"hazard_ridge", "cox_mode"}, "baselines.");
    read(b, "hazard_ridge", c.baselines.hazard_ridge, "baselines.");
    read(b, "cox_mode", c.baselines.cox_mode, "baselines.");

    const Json e = section(doc, "evaluation");
    reject_unknown(e, {"bins", "reference", "tables"}, "evaluation.");
    read(e, "bins", c.evaluation.bins, "evaluation.");
    read(e, "reference", c.evaluation.reference, "evaluation.");
    read(e, "tables", c.evaluation.tables, "evaluation.");

    const Json s = section(doc, "synthetic");
    reject_unknown(s,
                   {"regime", "indicators", "units", "periods", "burn_in", "first_period", "nonlinear", "drift",
                    "noise_sd", "unit_offset_sd"},
                   "synthetic.");
    read(s, "regime", c.synthetic.regime, "synthetic.");
    read(s, "indicators", c.synthetic.indicators, "synthetic.");
    read(s, "units", c.synthetic.units, "synthetic.");
    read(s, "periods", c.synthetic.periods, "synthetic.");
    read(s, "burn_in", c.synthetic.burn_in, "synthetic.");
    read(s, "first_period", c.synthetic.first_period, "synthetic.");
    read(s, "nonlinear", c.synthetic.nonlinear, "synthetic.");
    read(s, "drift", c.synthetic.drift, "synthetic.");
    read(s, "noise_sd", c.synthetic.noise_sd, "synthetic.");
    read(s, "unit_offset_sd", c.synthetic.unit_offset_sd, "synthetic.");

    c.validate();
    return c;
}

Json to_json(const RunConfig& c)
{
    Json doc;
    doc["data"] = c.data;
    doc["cutoff"] = c.cutoff ? Json(*c.cutoff) : Json(nullptr);
    doc["quantile"] = c.quantile;
    doc["out"] = c.out;
    doc["seed"] = c.seed;
    doc["workers"] = c.workers;
    const auto& d = c.discovery;
    doc["discovery"] = {{"max_lag", d.max_lag},
                        {"hidden", d.hidden},
                        {"lambda_grid", d.lambda_grid},
                        {"output_ridge", d.output_ridge},
                        {"max_epochs", d.max_epochs},
                        {"tolerance", d.tolerance},
                        {"validation_periods", d.validation_periods},
                        {"binarize", d.binarize},
                        {"edge_fraction", d.edge_fraction},
                        {"edge_k", d.edge_k},
                        {"edge_threshold", d.edge_threshold}};
    doc["dynamics"] = {{"graph", c.graph_path()},
                       {"lags", c.dynamics.lags},
                       {"basis_size", c.dynamics.basis_size},
                       {"ridge", c.dynamics.ridge}};
    doc["risk"] = {{"model", c.model_path()},
                   {"horizon", c.risk.horizon},
                   {"draws", c.risk.draws},
                   {"noise", c.risk.noise},
                   {"at_risk", c.risk.at_risk}};
    doc["baselines"] = {{"hazard_ridge", c.baselines.hazard_ridge}, {"cox_mode", c.baselines.cox_mode}};
    Json tables = Json::object();
    for (const auto& [name, path] : c.table_paths())
        tables[name] = path;
    doc["evaluation"] = {{"bins", c.evaluation.bins}, {"reference", c.evaluation.reference}, {"tables", tables}};
    const auto& s = c.synthetic;
    doc["synthetic"] = {{"regime", s.regime},         {"indicators", s.indicators},
                        {"units", s.units},           {"periods", s.periods},
                        {"burn_in", s.burn_in},       {"first_period", s.first_period},
                        {"nonlinear", s.nonlinear},   {"drift", s.drift},
                        {"noise_sd", s.noise_sd},     {"unit_offset_sd", s.unit_offset_sd}};
    return doc;
}

RunConfig resolve_config(const std::string& config_path, const Json& overrides)
{
    Json doc = Json::object();
    if (!config_path.empty())
        doc = read_json(config_path);
    if (!doc.is_object())
        throw InputError("config file '" + config_path + "' must hold a JSON object");
    doc.merge_patch(overrides);
    return config_from_json(doc);
}

// ---------------------------------------------------------------- data

PreparedData prepare_data(RunConfig& config)
{
    if (config.data.empty())
        throw InputError("no data file given (set 'data' in the config or pass --data)");
    PreparedData p;
    p.panel = load_panel(fs::path(config.data));
    if (!config.cutoff) {
        const int span = p.panel.last_period() - p.panel.first_period();
        config.cutoff = p.panel.first_period() + static_cast<int>(std::floor(0.7 * span));
    }
    p.cutoff = *config.cutoff;
    auto [train, test] = temporal_split(p.panel, p.cutoff);
    (void)test;
    p.specs = compute_thresholds(train, config.quantile);
    p.norm = compute_norm_stats(train);
    p.train_normalized = normalize(train, p.norm);
    p.panel_normalized = normalize(p.panel, p.norm);
    p.labels = label_failures(p.panel, p.specs);
    p.train_labels = label_failures(train, p.specs);
    return p;
}

LandmarkOptions evaluation_landmarks(const RunConfig& config, int cutoff, std::size_t history)
{
    LandmarkOptions lm;
    lm.horizon = config.risk.horizon;
    lm.history = history;
    lm.origin_min = cutoff;
    lm.rule = at_risk_rule_from_string(config.risk.at_risk);
    return lm;
}

// ---------------------------------------------------------------- commands

DiscoverOutput cmd_discover(RunConfig config)
{
    auto data = prepare_data(config);
    write_config(config, "discover");

    NetworkDiscoveryOptions opt;
    opt.fit.max_lag = config.discovery.max_lag;
    opt.fit.hidden = config.discovery.hidden;
    opt.fit.output_ridge = config.discovery.output_ridge;
    opt.fit.max_epochs = config.discovery.max_epochs;
    opt.fit.tolerance = config.discovery.tolerance;
    opt.fit.seed = config.seed;
    opt.lambda_grid = config.discovery.lambda_grid;
    opt.validation_periods = config.discovery.validation_periods;
    opt.workers = config.workers;

    DiscoverOutput out;
    out.run = discover_network(data.train_normalized, opt);
    out.graph = binarize(out.run.scores, binarize_rule(config.discovery));

    write_json(join(config.out, "scores.json"), to_json(out.run.scores));
    write_json(join(config.out, "adjacency.json"), to_json(out.graph.graph));
    write_edge_list(join(config.out, "edges.csv"), out.graph.graph, out.run.scores);
    write_lambda_selection(join(config.out, "lambda_selection.csv"), out.run.selection);
    write_json(join(config.out, "thresholds.json"), to_json(data.specs));
    write_json(join(config.out, "norm_stats.json"), to_json(data.norm));

    Json diag = Json::array();
    for (std::size_t i = 0; i < out.run.models.size(); ++i) {
        const auto& d = out.run.models[i].diagnostics;
        diag.push_back({{"target", data.panel.indicator_names()[i]},
                        {"converged", d.converged},
                        {"epochs", d.epochs},
                        {"objective", d.objective},
                        {"mse", d.mse},
                        {"gradient_norm", d.gradient_norm},
                        {"samples", d.samples}});
    }
    write_json(join(config.out, "discovery_report.json"),
               {{"lambda", out.run.selection.chosen}, {"cutoff_score", out.graph.cutoff},
                {"edges", out.graph.graph.edge_count()}, {"targets", diag}});
    return out;
}

NarModel cmd_fit(RunConfig config)
{
    auto data = prepare_data(config);
    const auto graph = adjacency_from_json(read_json(config.graph_path()));
    write_config(config, "fit");

    NarOptions opt;
    opt.lags = config.dynamics.lags;
    opt.basis_size = config.dynamics.basis_size;
    opt.ridge = config.dynamics.ridge;
    opt.workers = config.workers;
    if (graph.indicators.size() != data.panel.num_indicators())
        throw InputError("graph is " + std::to_string(graph.indicators.size()) + " x " +
                         std::to_string(graph.indicators.size()) + " but the data has " +
                         std::to_string(data.panel.num_indicators()) + " indicators");
    if (graph.indicators != data.panel.indicator_names())
        throw InputError("graph indicators do not match the data indicators");
    NarModel model = fit_nar(data.train_normalized, data.norm, graph, opt);
    if (model.independent_rows())
        log::info("the graph has no edges; the model reduces to independent autoregressions");
    write_json(join(config.out, "model.json"), to_json(model));

    const auto report = in_sample_report(model, data.train_normalized);
    std::ostringstream csv;
    csv << "indicator,count,mse,residual_mean,variance,independent_rows\n";
    for (const auto& s : report.indicators)
        csv << s.indicator << ',' << s.count << ',' << format_double(s.mse) << ',' << format_double(s.residual_mean)
            << ',' << format_double(s.variance) << ',' << (report.independent_rows ? 1 : 0) << '\n';
    write_text(join(config.out, "in_sample.csv"), csv.str());
    return model;
}

RiskTable cmd_risk(RunConfig config)
{
    auto data = prepare_data(config);
    const auto model = nar_model_from_json(read_json(config.model_path()));
    write_config(config, "risk");

    RiskSweepOptions opt;
    opt.simulation.horizon = config.risk.horizon;
    opt.simulation.draws = config.risk.draws;
    opt.simulation.seed = config.seed;
    opt.simulation.noise = noise_mode_from_string(config.risk.noise);
    opt.rule = at_risk_rule_from_string(config.risk.at_risk);
    opt.origin_min = data.cutoff;
    opt.workers = config.workers;
    auto table = risk_sweep(model, data.panel, data.specs, opt);
    write_risk_table(join(config.out, "risk_dcnar.csv"), table);
    return table;
}

BaselineRun cmd_baselines(RunConfig config)
{
    auto data = prepare_data(config);
    write_config(config, "baselines");

    BaselineOptions opt;
    opt.hazard.ridge = config.baselines.hazard_ridge;
    opt.cox_mode = cox_horizon_mode_from_string(config.baselines.cox_mode);
    opt.workers = config.workers;
    // Same cells as the trajectory model: its lag order sets the required history.
    const auto lm = evaluation_landmarks(config, data.cutoff, config.dynamics.lags);
    auto run = run_baselines(data.train_normalized, data.train_labels, data.panel_normalized, data.labels, lm, opt);
    write_risk_table(join(config.out, "risk_cox.csv"), run.cox_risk);
    write_risk_table(join(config.out, "risk_hazard.csv"), run.hazard_risk);

    Json models = Json::array();
    for (std::size_t k = 0; k < run.cox.size(); ++k) {
        std::vector<double> cox_beta(run.cox[k].beta.data(), run.cox[k].beta.data() + run.cox[k].beta.size());
        std::vector<double> hz_beta(run.hazard[k].beta.data(), run.hazard[k].beta.data() + run.hazard[k].beta.size());
        models.push_back({{"target", data.panel.indicator_names()[k]},
                          {"covariates", run.cox[k].covariates},
                          {"cox", {{"beta", cox_beta},
                                   {"baseline_hazard_total", run.cox[k].total_hazard()},
                                   {"max_time", run.cox[k].max_time}}},
                          {"hazard", {{"intercept", run.hazard[k].intercept}, {"beta", hz_beta}, {"ridge", run.hazard[k].ridge}}}});
    }
    write_json(join(config.out, "baseline_models.json"), {{"covariate_scale", "normalized"}, {"models", models}});
    return run;
}

ComparisonResult cmd_evaluate(RunConfig config)
{
    auto data = prepare_data(config);
    std::map<std::string, RiskTable> tables;
    for (const auto& [name, path] : config.table_paths())
        tables[name] = read_risk_table(path);
    write_config(config, "evaluate");

    OutcomeMap outcomes;
    const auto lm = evaluation_landmarks(config, data.cutoff, 1);
    for (const auto& cell : landmark_origins(data.panel, data.labels, lm))
        outcomes[{data.panel.units()[cell.unit], data.panel.period(cell.position),
                  data.panel.indicator_names()[cell.indicator]}] = cell.outcome;

    auto result = compare_models(config.evaluation.reference, tables, outcomes, config.evaluation.bins);
    write_eval_report_csv(join(config.out, "eval_report.csv"), result.report);
    write_comparison_csv(join(config.out, "comparison.csv"), result);
    write_text(join(config.out, "comparison_matrix.txt"), comparison_matrix_text(result));
    write_plot_table(join(config.out, "plot_long.csv"), result);

    Json entries = Json::array();
    for (const auto& e : result.report.entries)
        entries.push_back({{"indicator", e.indicator}, {"model", e.model}, {"metrics", metric_json(e.metrics)}});
    write_json(join(config.out, "eval_report.json"), {{"reference", result.reference}, {"entries", entries}});
    return result;
}

SyntheticPanel cmd_generate(RunConfig config)
{
    write_config(config, "generate");
    const auto& s = config.synthetic;
    GroundTruthSystem system = make_regime(regime_from_string(s.regime), s.indicators, config.seed);
    system.nonlinear = s.nonlinear;
    system.drift = s.drift;
    system.noise_sd = s.noise_sd;
    system.unit_offset_sd = s.unit_offset_sd;
    GenerateOptions opt;
    opt.units = s.units;
    opt.periods = s.periods;
    opt.burn_in = s.burn_in;
    opt.first_period = s.first_period;
    opt.seed = config.seed;
    opt.workers = config.workers;
    auto panel = generate(system, opt);

    std::ostringstream text;
    write_panel(text, panel.data);
    write_text(join(config.out, "panel.csv"), text.str());
    write_truth_edges(join(config.out, "truth_edges.csv"), panel.system);
    write_json(join(config.out, "truth.json"), to_json(panel.system));
    return panel;
}

ComparisonResult run_pipeline(const RunConfig& config)
{
    cmd_discover(config);
    cmd_fit(config);
    cmd_risk(config);
    cmd_baselines(config);
    return cmd_evaluate(config);
}

} // namespace dcnar
