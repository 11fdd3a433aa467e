#pragma once

// High-level review: semantic role bindings over a period axis and the
// financial integrity assertions evaluated against recalculated values.
// Assertions run on recalculated values only, never on author-cached ones.

#include "cellsentry/engine.hpp"
#include "cellsentry/findings.hpp"

namespace cellsentry {

inline const std::vector<std::string>& known_financial_roles() {
    static const std::vector<std::string> roles = {
        "total_assets", "total_liabilities", "equity",       "retained_earnings",
        "net_income",   "dividends",         "debt_balance", "debt_final_period",
        "fixed_asset_nbv", "revenue",        "costs",        "production",
        "tax_charge",
    };
    return roles;
}

struct FinancialSchema {
    RangeRef period_axis;
    bool horizontal = true;  // periods run across columns
    int period_count = 0;
    double tolerance = 0.005;  // half a currency cent by default
    std::map<std::string, RangeRef> roles;

    bool has_role(const std::string& role) const { return roles.count(role) > 0; }

    /// Cell bound to `role` at 1-based period `t`.
    CellRef role_cell(const std::string& role, int t) const {
        const RangeRef& r = roles.at(role);
        if (role == "debt_final_period") return r.start;
        CellRef c = r.start;
        if (horizontal) c.col += t - 1;
        else c.row += t - 1;
        return c;
    }
};

/// Resolves a binding written either as a range ("Fin!B5:K5") or as a
/// defined name.
inline RangeRef resolve_binding(const Workbook& wb, const std::string& text,
                                const std::string& what) {
    if (auto r = parse_range_text(text)) {
        const Sheet* s = wb.find_sheet(r->start.sheet);
        if (!s) throw SchemaError(what + ": sheet '" + r->start.sheet + "' does not exist");
        r->start.sheet = s->name;
        r->end.sheet = s->name;
        return *r;
    }
    try {
        return resolve_name(wb, text);
    } catch (const NameError& e) {
        throw SchemaError(what + ": '" + text + "' is neither a range nor a resolvable name");
    }
}

inline FinancialSchema load_schema_json(const json& doc, const Workbook& wb,
                                        const std::string& origin) {
    FinancialSchema schema;
    if (!doc.is_object() || !doc.contains("period_axis"))
        throw SchemaError(origin + ": schema needs a 'period_axis'");
    schema.period_axis =
        resolve_binding(wb, doc.at("period_axis").get<std::string>(), origin + "/period_axis");
    if (schema.period_axis.height() == 1) {
        schema.horizontal = true;
        schema.period_count = schema.period_axis.width();
    } else if (schema.period_axis.width() == 1) {
        schema.horizontal = false;
        schema.period_count = schema.period_axis.height();
    } else {
        throw SchemaError(origin + "/period_axis: must be a single row or column");
    }
    if (doc.contains("tolerance")) schema.tolerance = doc.at("tolerance").get<double>();
    if (schema.tolerance < 0) throw SchemaError(origin + "/tolerance: must be non-negative");

    if (doc.contains("roles")) {
        const json& roles = doc.at("roles");
        if (!roles.is_object()) throw SchemaError(origin + "/roles: must be an object");
        const auto& known = known_financial_roles();
        for (auto it = roles.begin(); it != roles.end(); ++it) {
            const std::string& role = it.key();
            if (std::find(known.begin(), known.end(), role) == known.end())
                throw SchemaError(origin + "/roles: unknown role '" + role + "'");
            RangeRef r = resolve_binding(wb, it.value().get<std::string>(),
                                         origin + "/roles/" + role);
            if (role == "debt_final_period") {
                if (!r.is_single_cell())
                    throw SchemaError(origin + "/roles/debt_final_period: must be a single cell");
            } else {
                int len = schema.horizontal ? r.width() : r.height();
                int breadth = schema.horizontal ? r.height() : r.width();
                if (breadth != 1)
                    throw SchemaError(origin + "/roles/" + role +
                                      ": must be a single row/column aligned with the period axis");
                if (len != schema.period_count)
                    throw SchemaError(origin + "/roles/" + role + ": covers " + std::to_string(len) +
                                      " periods, period axis has " +
                                      std::to_string(schema.period_count));
            }
            schema.roles[role] = r;
        }
    }
    return schema;
}

inline FinancialSchema load_schema(const std::filesystem::path& path, const Workbook& wb) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return load_schema_json(doc, wb, path.filename().string());
}

// ---------------------------------------------------------------------------
// Assertions
// ---------------------------------------------------------------------------

struct AssertionResult {
    std::string code;   // H001..H006
    std::string title;
    bool ran = false;   // false when required roles are unbound
    bool pass = false;  // meaningful only when ran
    std::vector<int> failing_periods;  // 1-based
    double worst_abs_deviation = 0.0;
    std::string note;

    friend bool operator==(const AssertionResult&, const AssertionResult&) = default;
};

namespace detail {

struct RoleReader {
    const FinancialSchema* schema;
    const RecalcResult* result;
    bool numeric_failure = false;
    std::vector<int> non_numeric_periods;

    std::optional<double> num(const std::string& role, int t) {
        Value v = result->value_at(schema->role_cell(role, t));
        if (v.is_blank()) return 0.0;
        if (v.is_number()) return v.num;
        return std::nullopt;
    }
};

inline int sign_of(double v, double tol) { return v > tol ? 1 : v < -tol ? -1 : 0; }

}  // namespace detail

/// Runs the six high-level checks. Unbound assertions are reported as
/// not-run, never as pass.
inline std::vector<AssertionResult> run_financial_assertions(const Workbook& /*wb*/,
                                                             const RecalcResult& result,
                                                             const FinancialSchema& schema) {
    std::vector<AssertionResult> out;
    const double tol = schema.tolerance;
    detail::RoleReader reader{&schema, &result};

    auto run = [&](const char* code, const char* title, std::vector<std::string> needed,
                   auto&& body) {
        AssertionResult r;
        r.code = code;
        r.title = title;
        bool have_all = true;
        for (const auto& role : needed)
            if (!schema.has_role(role)) have_all = false;
        if (!have_all) {
            r.ran = false;
            r.note = "required roles not bound";
            out.push_back(std::move(r));
            return;
        }
        r.ran = true;
        body(r);
        r.pass = r.failing_periods.empty();
        out.push_back(std::move(r));
    };

    auto check_period = [&](AssertionResult& r, int t, std::optional<double> deviation,
                            double threshold) {
        if (!deviation) {
            r.failing_periods.push_back(t);
            r.note = "non-numeric value in bound range";
            return;
        }
        if (std::abs(*deviation) > threshold) {
            r.failing_periods.push_back(t);
            r.worst_abs_deviation = std::max(r.worst_abs_deviation, std::abs(*deviation));
        }
    };

    run("H001", "balance sheet balances", {"total_assets", "total_liabilities", "equity"},
        [&](AssertionResult& r) {
            for (int t = 1; t <= schema.period_count; ++t) {
                auto a = reader.num("total_assets", t);
                auto l = reader.num("total_liabilities", t);
                auto e = reader.num("equity", t);
                if (!a || !l || !e) check_period(r, t, std::nullopt, tol);
                else check_period(r, t, *a - *l - *e, tol);
            }
        });

    run("H002", "retained earnings flow from the profit and loss account",
        {"retained_earnings", "net_income", "dividends"}, [&](AssertionResult& r) {
            for (int t = 2; t <= schema.period_count; ++t) {
                auto re = reader.num("retained_earnings", t);
                auto prev = reader.num("retained_earnings", t - 1);
                auto ni = reader.num("net_income", t);
                auto div = reader.num("dividends", t);
                if (!re || !prev || !ni || !div) check_period(r, t, std::nullopt, tol);
                else check_period(r, t, *re - (*prev + *ni - *div), tol);
            }
        });

    // H003 prefers the full debt schedule; a lone final-period binding works too.
    {
        AssertionResult r;
        r.code = "H003";
        r.title = "debt amortises to zero";
        if (schema.has_role("debt_balance")) {
            r.ran = true;
            auto v = reader.num("debt_balance", schema.period_count);
            if (!v) check_period(r, schema.period_count, std::nullopt, tol);
            else check_period(r, schema.period_count, *v, tol);
        } else if (schema.has_role("debt_final_period")) {
            r.ran = true;
            Value v = result.value_at(schema.role_cell("debt_final_period", 1));
            std::optional<double> n;
            if (v.is_blank()) n = 0.0;
            else if (v.is_number()) n = v.num;
            if (!n) check_period(r, schema.period_count, std::nullopt, tol);
            else check_period(r, schema.period_count, *n, tol);
        } else {
            r.note = "required roles not bound";
        }
        r.pass = r.ran && r.failing_periods.empty();
        out.push_back(std::move(r));
    }

    run("H004", "fixed assets never depreciate below zero", {"fixed_asset_nbv"},
        [&](AssertionResult& r) {
            for (int t = 1; t <= schema.period_count; ++t) {
                auto v = reader.num("fixed_asset_nbv", t);
                if (!v) check_period(r, t, std::nullopt, tol);
                else if (*v < -tol) {
                    r.failing_periods.push_back(t);
                    r.worst_abs_deviation = std::max(r.worst_abs_deviation, -*v);
                }
            }
        });

    run("H005", "revenues and costs reflect production", {"production", "revenue", "costs"},
        [&](AssertionResult& r) {
            for (int t = 1; t <= schema.period_count; ++t) {
                auto p = reader.num("production", t);
                auto rev = reader.num("revenue", t);
                auto c = reader.num("costs", t);
                if (!p || !rev || !c) {
                    check_period(r, t, std::nullopt, tol);
                    continue;
                }
                if (std::abs(*p) <= tol) {
                    double dev = std::max(std::abs(*rev), std::abs(*c));
                    if (dev > tol) {
                        r.failing_periods.push_back(t);
                        r.worst_abs_deviation = std::max(r.worst_abs_deviation, dev);
                    }
                }
            }
        });

    run("H006", "tax charge sign consistent with pre-tax income", {"tax_charge", "net_income"},
        [&](AssertionResult& r) {
            for (int t = 1; t <= schema.period_count; ++t) {
                auto tax = reader.num("tax_charge", t);
                auto ni = reader.num("net_income", t);
                if (!tax || !ni) {
                    check_period(r, t, std::nullopt, tol);
                    continue;
                }
                double pretax = *ni + *tax;
                int ts = detail::sign_of(*tax, tol);
                int ps = detail::sign_of(pretax, tol);
                if (ts != 0 && ts != ps) {
                    r.failing_periods.push_back(t);
                    r.worst_abs_deviation = std::max(r.worst_abs_deviation, std::abs(*tax));
                }
            }
        });

    return out;
}

/// Failed assertions as H-coded findings for the findings stream. Locations
/// point at the involved role cells of each failing period.
inline std::vector<Finding> assertion_findings(const std::vector<AssertionResult>& results,
                                               const FinancialSchema& schema) {
    static const std::map<std::string, std::vector<std::string>> involved = {
        {"H001", {"total_assets", "total_liabilities", "equity"}},
        {"H002", {"retained_earnings", "net_income", "dividends"}},
        {"H003", {"debt_balance", "debt_final_period"}},
        {"H004", {"fixed_asset_nbv"}},
        {"H005", {"production", "revenue", "costs"}},
        {"H006", {"tax_charge", "net_income"}},
    };
    std::vector<Finding> out;
    for (const auto& r : results) {
        if (!r.ran || r.pass) continue;
        Finding f;
        f.rule_code = r.code;
        f.severity = r.code == "H006" ? Severity::Warning : Severity::Error;
        for (int t : r.failing_periods)
            for (const auto& role : involved.at(r.code))
                if (schema.has_role(role))
                    f.locations.push_back(render_a1(schema.role_cell(role, t)));
        std::string periods;
        for (size_t i = 0; i < r.failing_periods.size(); ++i)
            periods += (i ? "," : "") + std::to_string(r.failing_periods[i]);
        f.message = std::string(r.title) + " fails in period(s) " + periods +
                    " (worst deviation " + render_number(r.worst_abs_deviation) + ")";
        out.push_back(std::move(f));
    }
    return out;
}

inline json assertion_results_to_json(const std::vector<AssertionResult>& results) {
    json arr = json::array();
    for (const auto& r : results)
        arr.push_back(json{{"code", r.code},
                           {"title", r.title},
                           {"ran", r.ran},
                           {"pass", r.pass},
                           {"failing_periods", r.failing_periods},
                           {"worst_abs_deviation", r.worst_abs_deviation},
                           {"note", r.note}});
    return arr;
}

inline std::vector<AssertionResult> assertion_results_from_json(const json& arr) {
    std::vector<AssertionResult> out;
    for (const auto& j : arr) {
        AssertionResult r;
        r.code = j.at("code").get<std::string>();
        r.title = j.at("title").get<std::string>();
        r.ran = j.at("ran").get<bool>();
        r.pass = j.at("pass").get<bool>();
        r.failing_periods = j.at("failing_periods").get<std::vector<int>>();
        r.worst_abs_deviation = j.at("worst_abs_deviation").get<double>();
        r.note = j.at("note").get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace cellsentry
