#include "dcnar/serialize.hpp"

#include "dcnar/error.hpp"
#include "dcnar/format.hpp"

#include <fstream>
#include <sstream>

namespace dcnar {

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write '" + path + "'");
    out << text;
    if (!out)
        throw InputError("failed writing '" + path + "'");
}

void write_json(const std::string& path, const Json& doc)
{
    write_text(path, doc.dump(2) + "\n");
}

Json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("'" + path + "' is not valid JSON: " + e.what());
    }
}

namespace {

template <class T>
T field(const Json& doc, const char* key)
{
    if (!doc.is_object() || !doc.contains(key))
        throw InputError(std::string("missing field '") + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError(std::string("field '") + key + "' has the wrong type");
    }
}

Json matrix_rows(const Eigen::MatrixXd& m)
{
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_rows(const Json& rows, std::size_t n, const char* what)
{
    if (!rows.is_array() || rows.size() != n)
        throw InputError(std::string(what) + " must have " + std::to_string(n) + " rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!rows[i].is_array() || rows[i].size() != n)
            throw InputError(std::string(what) + " must be " + std::to_string(n) + " x " + std::to_string(n));
        for (std::size_t j = 0; j < n; ++j) {
            if (!rows[i][j].is_number())
                throw InputError(std::string(what) + " has a non-numeric entry");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
        }
    }
    return m;
}

} // namespace

Json to_json(const std::vector<IndicatorSpec>& specs)
{
    Json arr = Json::array();
    for (const auto& s : specs)
        arr.push_back({{"indicator", s.name}, {"threshold", s.threshold}, {"direction", "below"}, {"quantile", s.quantile}});
    return {{"thresholds", arr}};
}

std::vector<IndicatorSpec> specs_from_json(const Json& doc)
{
    std::vector<IndicatorSpec> out;
    for (const auto& item : field<Json>(doc, "thresholds")) {
        IndicatorSpec s;
        s.name = field<std::string>(item, "indicator");
        s.threshold = field<double>(item, "threshold");
        s.quantile = field<double>(item, "quantile");
        if (field<std::string>(item, "direction") != "below")
            throw InputError("only the 'below' failure direction is supported");
        out.push_back(s);
    }
    return out;
}

Json to_json(const NormStats& stats)
{
    return {{"indicators", stats.indicators}, {"mean", stats.mean}, {"sd", stats.sd}};
}

NormStats norm_stats_from_json(const Json& doc)
{
    NormStats s;
    s.indicators = field<std::vector<std::string>>(doc, "indicators");
    s.mean = field<std::vector<double>>(doc, "mean");
    s.sd = field<std::vector<double>>(doc, "sd");
    if (s.mean.size() != s.indicators.size() || s.sd.size() != s.indicators.size())
        throw InputError("normalization statistics have inconsistent lengths");
    return s;
}

Json to_json(const CausalScoreMatrix& scores)
{
    return {{"indicators", scores.indicators}, {"layout", "scores[target][source]"}, {"scores", matrix_rows(scores.scores)}};
}

CausalScoreMatrix scores_from_json(const Json& doc)
{
    CausalScoreMatrix s;
    s.indicators = field<std::vector<std::string>>(doc, "indicators");
    s.scores = matrix_from_rows(field<Json>(doc, "scores"), s.indicators.size(), "score matrix");
    return s;
}

Json to_json(const AdjacencyMatrix& graph)
{
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < graph.edges.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < graph.edges.cols(); ++j)
            row.push_back(graph.edges(i, j) ? 1 : 0);
        rows.push_back(std::move(row));
    }
    return {{"indicators", graph.indicators}, {"layout", "edges[target][source]"}, {"edges", rows}};
}

AdjacencyMatrix adjacency_from_json(const Json& doc)
{
    auto g = AdjacencyMatrix::empty(field<std::vector<std::string>>(doc, "indicators"));
    const auto m = matrix_from_rows(field<Json>(doc, "edges"), g.size(), "adjacency matrix");
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (m(i, j) != 0.0 && m(i, j) != 1.0)
                throw InputError("adjacency entries must be 0 or 1");
            if (i == j && m(i, j) != 0.0)
                throw InputError("adjacency diagonal must be 0");
            g.edges(i, j) = m(i, j) != 0.0;
        }
    return g;
}

Json to_json(const NarModel& model)
{
    Json residuals = Json::array();
    for (const auto& r : model.residuals)
        residuals.push_back(r);
    return {{"indicators", model.indicators},
            {"graph", to_json(model.graph)},
            {"lags", model.lags},
            {"basis", {{"size", model.basis.size()}, {"t_min", model.basis.t_min()}, {"t_max", model.basis.t_max()}}},
            {"ridge", model.ridge},
            {"coefficient_layout", "[lag-1][target][source][basis]"},
            {"coefficients", model.coefficients},
            {"sigma", model.sigma},
            {"norm", to_json(model.norm)},
            {"residual_covariance", matrix_rows(model.residual_covariance)},
            {"residuals", residuals}};
}

NarModel nar_model_from_json(const Json& doc)
{
    NarModel m;
    m.indicators = field<std::vector<std::string>>(doc, "indicators");
    m.graph = adjacency_from_json(field<Json>(doc, "graph"));
    m.lags = field<std::size_t>(doc, "lags");
    const auto basis = field<Json>(doc, "basis");
    m.basis = SplineBasis(field<std::size_t>(basis, "size"), field<double>(basis, "t_min"), field<double>(basis, "t_max"));
    m.ridge = field<double>(doc, "ridge");
    m.coefficients = field<std::vector<double>>(doc, "coefficients");
    m.sigma = field<std::vector<double>>(doc, "sigma");
    m.norm = norm_stats_from_json(field<Json>(doc, "norm"));
    const std::size_t n = m.indicators.size();
    m.residual_covariance = matrix_from_rows(field<Json>(doc, "residual_covariance"), n, "residual covariance");
    for (const auto& r : field<Json>(doc, "residuals")) {
        auto v = r.get<std::vector<double>>();
        if (v.size() != n)
            throw InputError("stored residual vector has the wrong length");
        m.residuals.push_back(std::move(v));
    }
    if (m.graph.indicators != m.indicators || m.norm.indicators != m.indicators)
        throw InputError("model graph or normalization indicators do not match the model");
    if (m.lags == 0 || m.coefficients.size() != m.lags * n * n * m.basis.size() || m.sigma.size() != n)
        throw InputError("model coefficient or noise arrays have the wrong size");
    return m;
}

Json to_json(const GroundTruthSystem& system)
{
    Json edges = Json::array();
    for (const auto& e : system.edges)
        edges.push_back({{"source", system.indicators[e.source]},
                         {"target", system.indicators[e.target]},
                         {"lag", e.lag},
                         {"coefficient", e.coefficient}});
    return {{"regime", to_string(system.regime)},
            {"indicators", system.indicators},
            {"self", system.self},
            {"edges", edges},
            {"noise_sd", system.noise_sd},
            {"unit_offset_sd", system.unit_offset_sd},
            {"drift", system.drift},
            {"nonlinear", system.nonlinear},
            {"unit_root", system.unit_root},
            {"level", system.level},
            {"scale", system.scale}};
}

GroundTruthSystem system_from_json(const Json& doc)
{
    GroundTruthSystem s;
    s.regime = regime_from_string(field<std::string>(doc, "regime"));
    s.indicators = field<std::vector<std::string>>(doc, "indicators");
    s.self = field<std::vector<double>>(doc, "self");
    auto index = [&](const std::string& name) {
        for (std::size_t i = 0; i < s.indicators.size(); ++i)
            if (s.indicators[i] == name)
                return i;
        throw InputError("edge references unknown indicator '" + name + "'");
    };
    for (const auto& e : field<Json>(doc, "edges"))
        s.edges.push_back({index(field<std::string>(e, "source")), index(field<std::string>(e, "target")),
                           field<std::size_t>(e, "lag"), field<double>(e, "coefficient")});
    s.noise_sd = field<double>(doc, "noise_sd");
    s.unit_offset_sd = field<double>(doc, "unit_offset_sd");
    s.drift = field<double>(doc, "drift");
    s.nonlinear = field<bool>(doc, "nonlinear");
    s.unit_root = field<bool>(doc, "unit_root");
    s.level = field<double>(doc, "level");
    s.scale = field<double>(doc, "scale");
    s.validate();
    return s;
}

void write_edge_list(const std::string& path, const AdjacencyMatrix& graph, const CausalScoreMatrix& scores)
{
    std::ostringstream out;
    out << "source,target,score\n";
    for (Eigen::Index i = 0; i < graph.edges.rows(); ++i)
        for (Eigen::Index j = 0; j < graph.edges.cols(); ++j)
            if (graph.edges(i, j))
                out << graph.indicators[static_cast<std::size_t>(j)] << ',' << graph.indicators[static_cast<std::size_t>(i)]
                    << ',' << format_double(scores.scores(i, j)) << '\n';
    write_text(path, out.str());
}

void write_truth_edges(const std::string& path, const GroundTruthSystem& system)
{
    std::ostringstream out;
    out << "source,target,lag,coefficient\n";
    for (const auto& e : system.edges)
        out << system.indicators[e.source] << ',' << system.indicators[e.target] << ',' << e.lag << ','
            << format_double(e.coefficient) << '\n';
    write_text(path, out.str());
}

void write_lambda_selection(const std::string& path, const LambdaSelection& selection)
{
    std::ostringstream out;
    out << "lambda,validation_mse,active_edges,chosen\n";
    for (std::size_t k = 0; k < selection.grid.size(); ++k) {
        out << format_double(selection.grid[k]) << ',';
        out << (k < selection.validation_mse.size() ? format_double(selection.validation_mse[k]) : "NA") << ',';
        out << (k < selection.active_edges.size() ? std::to_string(selection.active_edges[k]) : "NA") << ',';
        out << (selection.grid[k] == selection.chosen ? 1 : 0) << '\n';
    }
    write_text(path, out.str());
}

} // namespace dcnar
