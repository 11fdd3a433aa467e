#pragma once

// Scenario definition and execution: key variables changed singly or in
// combination, recalculated deterministically, results and changed-variable
// model versions saved for the documentation trail.

#include "cellsentry/engine.hpp"

namespace cellsentry {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Scenario {
    std::string name;
    std::vector<std::pair<std::string, Value>> overrides;  // target text -> literal
    std::vector<std::string> watch;                        // output cells or names
    struct Expectation {
        std::optional<double> min;
        std::optional<double> max;
    };
    std::map<std::string, Expectation> expect;
};

struct ScenarioResult {
    std::string scenario;
    std::vector<std::pair<std::string, Value>> outputs;  // watch target -> value
    std::vector<CellRef> error_cells;
    bool expectations_pass = true;
    std::vector<std::string> expectation_failures;

    friend bool operator==(const ScenarioResult&, const ScenarioResult&) = default;
};

/// Resolves a scenario target (range text or defined name) to a single cell.
inline CellRef resolve_single_cell(const Workbook& wb, const std::string& text,
                                   const std::string& what) {
    std::optional<RangeRef> r = parse_range_text(text);
    if (!r) {
        try {
            r = resolve_name(wb, text);
        } catch (const NameError& e) {
            throw ScenarioError(what + ": '" + text + "' is neither a range nor a name (" +
                                e.what() + ")");
        }
    }
    if (!r->is_single_cell())
        throw ScenarioError(what + ": '" + text + "' must resolve to a single cell");
    const Sheet* s = wb.find_sheet(r->start.sheet);
    if (!s) throw ScenarioError(what + ": sheet '" + r->start.sheet + "' does not exist");
    CellRef c = r->start;
    c.sheet = s->name;
    c.col_abs = c.row_abs = false;
    return c;
}

inline Value value_from_json_literal(const json& j, const std::string& what) {
    if (j.is_number()) return Value::number(j.get<double>());
    if (j.is_string()) return Value::str(j.get<std::string>());
    if (j.is_boolean()) return Value::boolean_value(j.get<bool>());
    throw ScenarioError(what + ": override value must be number, string or bool");
}

inline std::vector<Scenario> load_scenario_suite_json(const json& doc, const std::string& origin) {
    if (!doc.is_object() || !doc.contains("scenarios") || !doc.at("scenarios").is_array())
        throw ScenarioError(origin + ": suite needs a 'scenarios' array");
    std::vector<Scenario> suite;
    for (size_t i = 0; i < doc.at("scenarios").size(); ++i) {
        const json& js = doc.at("scenarios")[i];
        std::string where = origin + "/scenarios[" + std::to_string(i) + "]";
        Scenario sc;
        if (!js.contains("name") || !js.at("name").is_string())
            throw ScenarioError(where + ": scenario needs a string 'name'");
        sc.name = js.at("name").get<std::string>();
        if (js.contains("set"))
            for (auto it = js.at("set").begin(); it != js.at("set").end(); ++it)
                sc.overrides.emplace_back(it.key(),
                                          value_from_json_literal(it.value(), where + "/set"));
        if (js.contains("watch"))
            for (const auto& w : js.at("watch")) sc.watch.push_back(w.get<std::string>());
        if (js.contains("expect"))
            for (auto it = js.at("expect").begin(); it != js.at("expect").end(); ++it) {
                Scenario::Expectation ex;
                if (it.value().contains("min")) ex.min = it.value().at("min").get<double>();
                if (it.value().contains("max")) ex.max = it.value().at("max").get<double>();
                sc.expect[it.key()] = ex;
            }
        suite.push_back(std::move(sc));
    }
    return suite;
}

inline std::vector<Scenario> load_scenario_suite(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ScenarioError(path.string() + ": " + e.what());
    }
    return load_scenario_suite_json(doc, path.filename().string());
}

/// Recalculation errors are captured in the result, never aborting a suite;
/// invalid targets (unknown cells, formula cells) are hard errors.
inline ScenarioResult run_scenario(const Workbook& wb, const Scenario& scenario) {
    OverrideMap overrides;
    for (const auto& [target, value] : scenario.overrides) {
        CellRef cell = resolve_single_cell(wb, target, "scenario '" + scenario.name + "'");
        if (wb.cell(cell).is_formula())
            throw ScenarioError("scenario '" + scenario.name + "': override target " +
                                render_a1(cell) + " is a formula cell");
        overrides[cell] = value;
    }
    RecalcResult recalc = recalculate(wb, overrides);

    ScenarioResult result;
    result.scenario = scenario.name;
    result.error_cells = recalc.cells_in_error;
    for (const std::string& w : scenario.watch) {
        CellRef cell = resolve_single_cell(wb, w, "scenario '" + scenario.name + "' watch");
        result.outputs.emplace_back(w, recalc.value_at(cell));
    }
    for (const auto& [target, ex] : scenario.expect) {
        CellRef cell = resolve_single_cell(wb, target, "scenario '" + scenario.name + "' expect");
        Value v = recalc.value_at(cell);
        std::string failure;
        if (!v.is_number()) {
            failure = target + ": expected a number, got " + render_value(v);
        } else if (ex.min && v.num < *ex.min) {
            failure = target + ": " + render_number(v.num) + " below min " + render_number(*ex.min);
        } else if (ex.max && v.num > *ex.max) {
            failure = target + ": " + render_number(v.num) + " above max " + render_number(*ex.max);
        }
        if (!failure.empty()) {
            result.expectations_pass = false;
            result.expectation_failures.push_back(std::move(failure));
        }
    }
    return result;
}

/// Workbook copy with scenario overrides applied as literal cell content —
/// the saved "version of the model containing the changed variables".
inline Workbook apply_overrides_to_workbook(const Workbook& wb, const Scenario& scenario) {
    Workbook copy = wb;
    for (const auto& [target, value] : scenario.overrides) {
        CellRef cell = resolve_single_cell(wb, target, "scenario '" + scenario.name + "'");
        int si = copy.sheet_index(cell.sheet);
        Cell content;
        switch (value.type) {
            case Value::Type::Number: content = Cell::num(value.num); break;
            case Value::Type::Text: content = Cell::label(value.text); break;
            case Value::Type::Bool: content = Cell::boolean_cell(value.boolean); break;
            case Value::Type::Error: content = Cell::error_literal(value.err); break;
            case Value::Type::Blank: break;
        }
        GridPos pos{cell.row, cell.col};
        if (value.type == Value::Type::Blank) copy.sheets[si].cells.erase(pos);
        else copy.sheets[si].cells[pos] = content;
    }
    return copy;
}

inline std::string scenario_artifact_name(const std::string& scenario_name) {
    std::string out = "scenario_";
    for (char c : scenario_name)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out + ".json";
}

inline json scenario_results_to_json(const std::vector<ScenarioResult>& results) {
    json arr = json::array();
    for (const auto& r : results) {
        json outputs = json::array();
        for (const auto& [target, value] : r.outputs)
            outputs.push_back(json{{"target", target}, {"value", value_to_json(value)}});
        json errors = json::array();
        for (const auto& c : r.error_cells) errors.push_back(render_a1(c));
        arr.push_back(json{{"scenario", r.scenario},
                           {"outputs", outputs},
                           {"error_cells", errors},
                           {"expectations_pass", r.expectations_pass},
                           {"expectation_failures", r.expectation_failures}});
    }
    return arr;
}

/// Runs the base case then every scenario in file order. With an output
/// directory, saves one workbook copy per scenario plus the combined results.
inline std::vector<ScenarioResult> run_sensitivity_suite(
    const Workbook& wb, const std::vector<Scenario>& suite,
    const std::optional<std::filesystem::path>& out_dir = std::nullopt,
    const std::vector<std::string>& default_watch = {}) {
    if (suite.empty()) throw ScenarioError("scenario suite is empty");
    std::set<std::string> seen{"base"};
    for (const auto& sc : suite)
        if (!seen.insert(sc.name).second)
            throw ScenarioError("duplicate scenario name '" + sc.name + "'");

    Scenario base;
    base.name = "base";
    base.watch = default_watch;
    if (base.watch.empty())
        for (const auto& sc : suite)
            for (const auto& w : sc.watch)
                if (std::find(base.watch.begin(), base.watch.end(), w) == base.watch.end())
                    base.watch.push_back(w);

    std::vector<ScenarioResult> results;
    results.push_back(run_scenario(wb, base));
    for (const auto& sc : suite) results.push_back(run_scenario(wb, sc));

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        for (const auto& sc : suite)
            save_workbook(apply_overrides_to_workbook(wb, sc),
                          *out_dir / scenario_artifact_name(sc.name));
        std::ofstream out(*out_dir / "results.json", std::ios::binary);
        if (!out) throw IoError("cannot write scenario results");
        out << scenario_results_to_json(results).dump(1) << "\n";
    }
    return results;
}

}  // namespace cellsentry
