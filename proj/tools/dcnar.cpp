// Command-line front end. Exit codes: 0 success, 1 computation failure,
// 2 input or configuration error.
#include "dcnar/error.hpp"
#include "dcnar/log.hpp"
#include "dcnar/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>
#include <vector>

namespace {

using dcnar::Json;

struct Command {
    CLI::App* app = nullptr;
    std::string config_path;
    Json overrides = Json::object();
    bool quiet = false;
    bool verbose = false;
};

// Registers `--flag` whose value, when given, is written to overrides[section][key].
template <class T>
void bind(Command& cmd, const std::string& flag, const std::string& section, const std::string& key,
          const std::string& help)
{
    cmd.app->add_option_function<T>(
        flag,
        [&cmd, section, key](const T& value) {
            if (section.empty())
                cmd.overrides[key] = value;
            else
                cmd.overrides[section][key] = value;
        },
        help);
}

void common(Command& cmd)
{
    cmd.app->add_option("--config", cmd.config_path, "JSON run configuration");
    bind<std::string>(cmd, "--out", "", "out", "output directory");
    bind<std::uint64_t>(cmd, "--seed", "", "seed", "random seed");
    bind<std::size_t>(cmd, "--workers", "", "workers", "worker threads");
    cmd.app->add_flag("--quiet", cmd.quiet, "suppress warnings");
    cmd.app->add_flag("--verbose", cmd.verbose, "print progress information");
}

void data_options(Command& cmd)
{
    bind<std::string>(cmd, "--data", "", "data", "panel file (unit,period,indicator,value)");
    bind<int>(cmd, "--cutoff", "", "cutoff", "last training period");
    bind<double>(cmd, "--quantile", "", "quantile", "failure threshold quantile");
}

void discovery_options(Command& cmd)
{
    bind<std::size_t>(cmd, "--max-lag", "discovery", "max_lag", "maximum lag L");
    bind<std::size_t>(cmd, "--hidden", "discovery", "hidden", "hidden units per lag function");
    bind<std::vector<double>>(cmd, "--lambda", "discovery", "lambda_grid", "sparsity penalty grid");
    bind<double>(cmd, "--output-ridge", "discovery", "output_ridge", "ridge on output weights");
    bind<std::size_t>(cmd, "--max-epochs", "discovery", "max_epochs", "optimizer epoch limit");
    bind<std::size_t>(cmd, "--validation-periods", "discovery", "validation_periods",
                      "trailing training periods held out for lambda selection");
    bind<std::string>(cmd, "--binarize", "discovery", "binarize", "top_fraction, top_k or absolute");
    bind<double>(cmd, "--edge-fraction", "discovery", "edge_fraction", "fraction of edges kept (top_fraction)");
    bind<std::size_t>(cmd, "--edge-k", "discovery", "edge_k", "edges kept (top_k)");
    bind<double>(cmd, "--edge-threshold", "discovery", "edge_threshold", "score threshold (absolute)");
}

void dynamics_options(Command& cmd)
{
    bind<std::string>(cmd, "--graph", "dynamics", "graph", "adjacency JSON");
    bind<std::size_t>(cmd, "--lags", "dynamics", "lags", "autoregressive order p");
    bind<std::size_t>(cmd, "--basis", "dynamics", "basis_size", "spline basis size B");
    bind<double>(cmd, "--ridge", "dynamics", "ridge", "ridge penalty");
}

void risk_options(Command& cmd, bool with_model)
{
    if (with_model) {
        bind<std::string>(cmd, "--model", "risk", "model", "fitted model JSON");
        bind<std::size_t>(cmd, "--draws", "risk", "draws", "Monte Carlo paths per origin");
        bind<std::string>(cmd, "--noise", "risk", "noise", "gaussian, covariance, bootstrap or none");
    }
    bind<std::size_t>(cmd, "--horizon", "risk", "horizon", "risk horizon h");
    bind<std::string>(cmd, "--at-risk", "risk", "at_risk", "currently_healthy or never_failed");
}

void baseline_options(Command& cmd)
{
    bind<double>(cmd, "--hazard-ridge", "baselines", "hazard_ridge", "ridge for the discrete hazard model");
    bind<std::string>(cmd, "--cox-mode", "baselines", "cox_mode", "average or window");
}

void evaluation_options(Command& cmd)
{
    cmd.app->add_option_function<std::vector<std::string>>(
        "--table",
        [&cmd](const std::vector<std::string>& items) {
            Json tables = Json::object();
            for (const auto& item : items) {
                const auto eq = item.find('=');
                if (eq == std::string::npos || eq == 0)
                    throw CLI::ValidationError("--table", "expected NAME=PATH, got '" + item + "'");
                tables[item.substr(0, eq)] = item.substr(eq + 1);
            }
            cmd.overrides["evaluation"]["tables"] = tables;
        },
        "risk table as NAME=PATH (repeatable)");
    bind<std::string>(cmd, "--reference", "evaluation", "reference", "model compared against the others");
    bind<std::size_t>(cmd, "--bins", "evaluation", "bins", "calibration bins");
}

void synthetic_options(Command& cmd)
{
    bind<std::string>(cmd, "--regime", "synthetic", "regime", "propagation_driven, state_driven, chain or hub");
    bind<std::size_t>(cmd, "--indicators", "synthetic", "indicators", "indicator count");
    bind<std::size_t>(cmd, "--units", "synthetic", "units", "unit count");
    bind<std::size_t>(cmd, "--periods", "synthetic", "periods", "periods kept");
    bind<std::size_t>(cmd, "--burn-in", "synthetic", "burn_in", "periods discarded");
    bind<int>(cmd, "--first-period", "synthetic", "first_period", "label of the first period");
    bind<bool>(cmd, "--nonlinear", "synthetic", "nonlinear", "saturating cross effects (true/false)");
    bind<double>(cmd, "--drift", "synthetic", "drift", "relative edge-coefficient drift");
    bind<double>(cmd, "--noise-sd", "synthetic", "noise_sd", "innovation standard deviation");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dynamic causal network autoregression: discovery, dynamics, trajectory risk and baselines"};
    app.require_subcommand(1);

    std::vector<Command> commands(7);
    const char* names[] = {"generate", "discover", "fit", "risk", "baselines", "evaluate", "run"};
    const char* help[] = {"simulate a synthetic panel with known ground truth",
                          "learn the causal score matrix and adjacency",
                          "fit the time-varying network autoregression",
                          "Monte Carlo trajectory risk",
                          "Cox and discrete-hazard baseline risk",
                          "metrics and win/loss comparison across risk tables",
                          "discover, fit, risk, baselines and evaluate in one process"};
    for (std::size_t k = 0; k < commands.size(); ++k) {
        commands[k].app = app.add_subcommand(names[k], help[k]);
        common(commands[k]);
    }
    Command& gen = commands[0];
    Command& disc = commands[1];
    Command& fit = commands[2];
    Command& risk = commands[3];
    Command& base = commands[4];
    Command& eval = commands[5];
    Command& run = commands[6];
    synthetic_options(gen);
    data_options(disc);
    discovery_options(disc);
    data_options(fit);
    dynamics_options(fit);
    data_options(risk);
    risk_options(risk, true);
    data_options(base);
    baseline_options(base);
    risk_options(base, false);
    bind<std::size_t>(base, "--lags", "dynamics", "lags", "history the trajectory model needs (its order p)");
    data_options(eval);
    risk_options(eval, false);
    evaluation_options(eval);
    data_options(run);
    discovery_options(run);
    dynamics_options(run);
    risk_options(run, true);
    baseline_options(run);
    evaluation_options(run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "dcnar: error: " << e.what() << '\n';
        return 2;
    }

    for (std::size_t k = 0; k < commands.size(); ++k) {
        Command& cmd = commands[k];
        if (!cmd.app->parsed())
            continue;
        dcnar::log::set_level(cmd.quiet     ? dcnar::log::Level::quiet
                              : cmd.verbose ? dcnar::log::Level::info
                                            : dcnar::log::Level::warning);
        try {
            const auto config = dcnar::resolve_config(cmd.config_path, cmd.overrides);
            const std::string name = names[k];
            if (name == "generate")
                dcnar::cmd_generate(config);
            else if (name == "discover")
                dcnar::cmd_discover(config);
            else if (name == "fit")
                dcnar::cmd_fit(config);
            else if (name == "risk")
                dcnar::cmd_risk(config);
            else if (name == "baselines")
                dcnar::cmd_baselines(config);
            else if (name == "evaluate")
                std::cout << dcnar::comparison_matrix_text(dcnar::cmd_evaluate(config));
            else
                std::cout << dcnar::comparison_matrix_text(dcnar::run_pipeline(config));
            return 0;
        } catch (const dcnar::InputError& e) {
            std::cerr << "dcnar " << names[k] << ": input error: " << e.what() << '\n';
            return 2;
        } catch (const dcnar::ComputeError& e) {
            std::cerr << "dcnar " << names[k] << ": computation failed: " << e.what() << '\n';
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "dcnar " << names[k] << ": computation failed: " << e.what() << '\n';
            return 1;
        }
    }
    return 2;
}
