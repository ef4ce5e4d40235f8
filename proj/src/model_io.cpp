#include "eqstop/model_io.hpp"
#include "eqstop/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace eqstop {

using nlohmann::json;

namespace {

GDescriptor g_from_json(const json& j) {
    if (!j.is_object() || !j.contains("family"))
        throw ParameterError("payoff g block must be an object with a 'family'");
    const std::string family = j.at("family").get<std::string>();
    const json params = j.value("params", json::object());

    GDescriptor g;
    if (family == "zero") {
        g = g_zero();
    } else if (family == "affine") {
        g = g_affine(params.value("a", 0.0), params.value("b", 0.0));
    } else if (family == "mean_variance") {
        if (!params.contains("gamma")) throw ParameterError("mean_variance g needs params.gamma");
        g = g_mean_variance(params.at("gamma").get<double>());
    } else if (family == "neg_square") {
        g = g_neg_square();
    } else if (family == "shifted_positive_part") {
        if (!params.contains("c")) throw ParameterError("shifted_positive_part g needs params.c");
        g = g_shifted_positive_part(params.at("c").get<double>());
    } else if (family == "piecewise_polynomial") {
        if (!params.contains("breakpoints") || !params.contains("coefficients"))
            throw ParameterError("piecewise_polynomial g needs params.breakpoints and params.coefficients");
        if (!j.contains("shape")) throw ParameterError("piecewise_polynomial g needs an explicit shape");
        std::string shape = j.at("shape").get<std::string>();
        GShape s;
        if (shape == "affine") s = GShape::affine;
        else if (shape == "convex") s = GShape::convex;
        else if (shape == "strictly_convex") s = GShape::strictly_convex;
        else if (shape == "concave") s = GShape::concave;
        else if (shape == "general") s = GShape::general;
        else throw ParameterError("unknown g shape '" + shape + "'");
        g = g_piecewise(params.at("breakpoints").get<std::vector<double>>(),
                        params.at("coefficients").get<std::vector<std::vector<double>>>(), s,
                        params.value("differentiability", 0));
        return g;
    } else {
        throw ParameterError("unknown g family '" + family + "'");
    }

    // Built-in families fix their shape; a conflicting declaration is an error.
    if (j.contains("shape")) {
        std::string declared = j.at("shape").get<std::string>();
        if (declared != to_string(g.shape))
            throw ParameterError("g family '" + family + "' has shape " + to_string(g.shape) +
                                 ", not '" + declared + "'");
    }
    return g;
}

json g_to_json(const GDescriptor& g) {
    json j;
    j["family"] = to_string(g.family);
    j["shape"] = to_string(g.shape);
    json params = json::object();
    switch (g.family) {
        case GFamily::zero: break;
        case GFamily::affine:
            params["a"] = g.slope;
            params["b"] = g.intercept;
            break;
        case GFamily::mean_variance: params["gamma"] = g.gamma; break;
        case GFamily::neg_square: break;
        case GFamily::shifted_positive_part: params["c"] = g.shift; break;
        case GFamily::piecewise_polynomial:
            params["breakpoints"] = g.breakpoints;
            params["coefficients"] = g.coefficients;
            params["differentiability"] = g.differentiability;
            break;
    }
    if (!params.empty()) j["params"] = params;
    return j;
}

} // namespace

ModelFile parse_model_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParameterError(std::string("model file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("states") || !j.contains("transition"))
        throw ParameterError("model file must contain 'states' and 'transition'");

    std::vector<StateRecord> states;
    for (const json& s : j.at("states")) {
        if (!s.contains("label") || !s.contains("value"))
            throw ParameterError("each state needs 'label' and 'value'");
        states.push_back({s.at("label").get<std::string>(), s.at("value").get<double>()});
    }
    const size_t n = states.size();

    std::vector<double> transition;
    transition.reserve(n * n);
    const json& rows = j.at("transition");
    if (rows.size() != n) throw ParameterError("transition must have one row per state");
    for (const json& row : rows) {
        if (row.size() != n) throw ParameterError("transition rows must have one entry per state");
        for (const json& v : row) transition.push_back(v.get<double>());
    }

    ModelFile file{MarkovModel(std::move(states), std::move(transition)), std::nullopt};

    if (j.contains("payoff")) {
        const json& p = j.at("payoff");
        const std::string type = p.value("type", "");
        if (type == "mean_variance") {
            if (!p.contains("gamma")) throw ParameterError("mean_variance payoff needs 'gamma'");
            file.payoff = make_mean_variance(file.model, p.at("gamma").get<double>());
        } else if (type == "variance") {
            file.payoff = make_variance(file.model);
        } else if (type == "custom") {
            if (!p.contains("f") || !p.contains("h") || !p.contains("g"))
                throw ParameterError("custom payoff needs 'f', 'h' and 'g'");
            file.payoff = make_payoff(file.model, p.at("f").get<std::vector<double>>(),
                                      p.at("h").get<std::vector<double>>(), g_from_json(p.at("g")));
        } else {
            throw ParameterError("unknown payoff type '" + type + "'");
        }
    }
    return file;
}

ModelFile load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open model file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_model_json(buffer.str());
}

std::string model_to_json(const MarkovModel& model, const PayoffSpec* payoff) {
    json j;
    j["states"] = json::array();
    for (const StateRecord& s : model.states()) j["states"].push_back({{"label", s.label}, {"value", s.value}});
    j["transition"] = json::array();
    const int n = model.size();
    for (int i = 0; i < n; ++i) {
        json row = json::array();
        for (int k = 0; k < n; ++k) row.push_back(model.prob(i, k));
        j["transition"].push_back(row);
    }
    if (payoff) {
        json p;
        p["type"] = "custom";
        p["f"] = payoff->f;
        p["h"] = payoff->h;
        p["g"] = g_to_json(payoff->g);
        j["payoff"] = p;
    }
    return j.dump(2) + "\n";
}

} // namespace eqstop
