#pragma once

// The low-level review rule catalogue: named-range integrity, per-formula
// technical checks, and copy-region outlier detection. Every check is pure
// over immutable inputs and produces findings in a deterministic order.

#include <regex>
#include <set>

#include "cellsentry/engine.hpp"
#include "cellsentry/findings.hpp"
#include "cellsentry/graph.hpp"

namespace cellsentry {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RuleConfig {
    std::set<std::string> enabled;  // empty set = all rules enabled
    std::vector<double> constant_allowlist{0.0, 1.0, -1.0};
    double region_majority = 0.7;   // must lie in (0.5, 1.0]
    int min_run_length = 3;         // must be >= 2
    std::map<std::string, Severity> severity_overrides;
    std::string name_pattern = "^[A-Z][A-Za-z0-9_]*$";

    void validate() const {
        if (!(region_majority > 0.5 && region_majority <= 1.0))
            throw ConfigError("region majority threshold must lie in (0.5, 1.0]");
        if (min_run_length < 2) throw ConfigError("minimum run length must be >= 2");
    }

    bool rule_enabled(const std::string& code) const {
        return enabled.empty() || enabled.count(code) > 0;
    }

    Severity severity_for(const std::string& code) const {
        auto it = severity_overrides.find(code);
        if (it != severity_overrides.end()) return it->second;
        return code == "R025" ? Severity::Error : Severity::Warning;
    }
};

inline RuleConfig rule_config_from_json(const json& j) {
    RuleConfig cfg;
    if (j.contains("enabled"))
        for (const auto& code : j.at("enabled")) cfg.enabled.insert(code.get<std::string>());
    if (j.contains("constant_allowlist"))
        cfg.constant_allowlist = j.at("constant_allowlist").get<std::vector<double>>();
    if (j.contains("region_majority")) cfg.region_majority = j.at("region_majority").get<double>();
    if (j.contains("min_run_length")) cfg.min_run_length = j.at("min_run_length").get<int>();
    if (j.contains("name_pattern")) cfg.name_pattern = j.at("name_pattern").get<std::string>();
    if (j.contains("severity_overrides"))
        for (auto it = j.at("severity_overrides").begin(); it != j.at("severity_overrides").end(); ++it) {
            auto sev = parse_severity(it.value().get<std::string>());
            if (!sev) throw ConfigError("unknown severity for " + it.key());
            cfg.severity_overrides[it.key()] = *sev;
        }
    cfg.validate();
    return cfg;
}

namespace detail {

inline Finding make_finding(const RuleConfig& cfg, std::string code,
                            std::vector<std::string> locations, std::string message) {
    Finding f;
    f.severity = cfg.severity_for(code);
    f.rule_code = std::move(code);
    f.locations = std::move(locations);
    f.message = std::move(message);
    return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Named-range rules R010..R013
// ---------------------------------------------------------------------------

inline std::vector<Finding> check_named_ranges(const Workbook& wb,
                                               const RuleConfig& cfg = RuleConfig{}) {
    std::vector<Finding> out;
    std::regex convention(cfg.name_pattern);

    struct Resolved {
        const NamedRange* name;
        RangeRef range;
    };
    std::vector<Resolved> resolved;
    for (const auto& nr : wb.names) {
        try {
            resolved.push_back({&nr, resolve_name(wb, nr.name)});
        } catch (const NameError&) {
            if (cfg.rule_enabled("R012"))
                out.push_back(detail::make_finding(
                    cfg, "R012", {"name:" + nr.name},
                    "name '" + nr.name + "' does not resolve: target '" + nr.target_text + "'"));
        }
        if (cfg.rule_enabled("R013") && !std::regex_match(nr.name, convention))
            out.push_back(detail::make_finding(
                cfg, "R013", {"name:" + nr.name},
                "name '" + nr.name + "' breaches the naming convention " + cfg.name_pattern));
    }

    if (cfg.rule_enabled("R010")) {
        for (size_t i = 0; i < resolved.size(); ++i)
            for (size_t j = i + 1; j < resolved.size(); ++j) {
                auto overlap = resolved[i].range.intersect(resolved[j].range);
                if (!overlap) continue;
                out.push_back(detail::make_finding(
                    cfg, "R010", {render_range(*overlap)},
                    "names '" + resolved[i].name->name + "' and '" + resolved[j].name->name +
                        "' overlap on " + render_range(*overlap)));
            }
    }

    if (cfg.rule_enabled("R011")) {
        for (const auto& r : resolved) {
            const Sheet* sheet = wb.find_sheet(r.range.start.sheet);
            bool any_content = false;
            auto lo = sheet->cells.lower_bound(GridPos{r.range.start.row, 0});
            auto hi = sheet->cells.upper_bound(GridPos{r.range.end.row, kMaxCol + 1});
            for (auto it = lo; it != hi; ++it)
                if (it->first.col >= r.range.start.col && it->first.col <= r.range.end.col) {
                    any_content = true;
                    break;
                }
            if (!any_content)
                out.push_back(detail::make_finding(
                    cfg, "R011", {render_range(r.range)},
                    "name '" + r.name->name + "' covers only blank cells"));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Formula rules R020..R027
// ---------------------------------------------------------------------------

struct FunctionSignature {
    int min_args;
    int max_args;
};

/// Static signature table for the supported function set.
inline const std::map<std::string, FunctionSignature>& function_signatures() {
    static const std::map<std::string, FunctionSignature> table = {
        {"SUM", {1, kMaxCallArgs}},    {"MIN", {1, kMaxCallArgs}},
        {"MAX", {1, kMaxCallArgs}},    {"AVERAGE", {1, kMaxCallArgs}},
        {"COUNT", {1, kMaxCallArgs}},  {"COUNTA", {1, kMaxCallArgs}},
        {"IF", {2, 3}},                {"AND", {1, kMaxCallArgs}},
        {"OR", {1, kMaxCallArgs}},     {"NOT", {1, 1}},
        {"ABS", {1, 1}},               {"ROUND", {2, 2}},
        {"ROUNDUP", {2, 2}},           {"ROUNDDOWN", {2, 2}},
        {"INDEX", {2, 3}},             {"MATCH", {2, 3}},
        {"VLOOKUP", {3, 4}},           {"NPV", {2, kMaxCallArgs}},
        {"IRR", {1, 2}},
    };
    return table;
}

/// Argument slots that carry structural parameters (digit counts, lookup
/// indexes, match modes) rather than model data; constants there are exempt
/// from the embedded-constant rule. Zero-based argument indexes.
inline bool is_structural_argument(const std::string& fn, size_t arg_index) {
    if ((fn == "ROUND" || fn == "ROUNDUP" || fn == "ROUNDDOWN") && arg_index == 1) return true;
    if (fn == "VLOOKUP" && (arg_index == 2 || arg_index == 3)) return true;
    if (fn == "MATCH" && arg_index == 2) return true;
    if (fn == "INDEX" && (arg_index == 1 || arg_index == 2)) return true;
    return false;
}

namespace detail {

/// Formula shape with every reference blanked out; used to recognize cells
/// that were meant to be copies of one another regardless of offsets.
inline void skeleton_walk(const Expr& e, std::string& out) {
    switch (e.kind) {
        case Expr::Kind::Number: out += render_number(e.number); return;
        case Expr::Kind::Text: out += '"'; out += e.text; out += '"'; return;
        case Expr::Kind::Bool: out += e.boolean ? "TRUE" : "FALSE"; return;
        case Expr::Kind::Error: out += error_code_text(e.error); return;
        case Expr::Kind::CellReference: out += '@'; return;
        case Expr::Kind::RangeReference: out += "@:@"; return;
        case Expr::Kind::NameReference: out += e.text; return;
        case Expr::Kind::Unary:
            out += e.un_op == UnOp::Neg ? "-(" : e.un_op == UnOp::Plus ? "+(" : "%(";
            skeleton_walk(e.args[0], out);
            out += ')';
            return;
        case Expr::Kind::Binary:
            out += '(';
            skeleton_walk(e.args[0], out);
            out += bin_op_text(e.bin_op);
            skeleton_walk(e.args[1], out);
            out += ')';
            return;
        case Expr::Kind::Call:
            out += e.text;
            out += '(';
            for (size_t i = 0; i < e.args.size(); ++i) {
                if (i) out += ',';
                skeleton_walk(e.args[i], out);
            }
            out += ')';
            return;
    }
}

inline std::string formula_skeleton(const Expr& e) {
    std::string out;
    skeleton_walk(e, out);
    return out;
}

/// Fixity pattern of every reference in tree order: for each reference the
/// absolute flags of its components.
inline void fixity_walk(const Expr& e, std::vector<uint8_t>& out) {
    switch (e.kind) {
        case Expr::Kind::CellReference:
            out.push_back(static_cast<uint8_t>((e.ref.col_abs << 1) | e.ref.row_abs));
            return;
        case Expr::Kind::RangeReference:
            out.push_back(static_cast<uint8_t>((e.range.start.col_abs << 1) | e.range.start.row_abs));
            out.push_back(static_cast<uint8_t>((e.range.end.col_abs << 1) | e.range.end.row_abs));
            return;
        default:
            for (const Expr& a : e.args) fixity_walk(a, out);
            return;
    }
}

struct EmbeddedConstant {
    double value;
    std::string rendering;
};

inline void embedded_constants_walk(const Expr& e, const RuleConfig& cfg,
                                    std::vector<EmbeddedConstant>& out) {
    // Sign/percent-wrapped literals count as one constant.
    if (e.kind == Expr::Kind::Unary && e.args[0].kind == Expr::Kind::Number) {
        double v = e.args[0].number;
        if (e.un_op == UnOp::Neg) v = -v;
        if (e.un_op == UnOp::Percent) v /= 100.0;
        for (double allowed : cfg.constant_allowlist)
            if (v == allowed) return;
        out.push_back({v, render_number(v)});
        return;
    }
    if (e.kind == Expr::Kind::Number) {
        for (double allowed : cfg.constant_allowlist)
            if (e.number == allowed) return;
        out.push_back({e.number, render_number(e.number)});
        return;
    }
    if (e.kind == Expr::Kind::Call) {
        for (size_t i = 0; i < e.args.size(); ++i) {
            if (is_structural_argument(e.text, i)) continue;
            embedded_constants_walk(e.args[i], cfg, out);
        }
        return;
    }
    for (const Expr& a : e.args) embedded_constants_walk(a, cfg, out);
}

inline bool ast_contains_error_literal(const Expr& e, ErrorCode& which) {
    if (e.kind == Expr::Kind::Error) {
        which = e.error;
        return true;
    }
    for (const Expr& a : e.args)
        if (ast_contains_error_literal(a, which)) return true;
    return false;
}

/// For approximate-match lookups over a literal table column: detectable
/// when every non-blank member is a numeric literal. Returns true when an
/// adjacent descending pair proves the column unsorted.
inline bool literal_column_unsorted(const Workbook& wb, const RangeRef& r, bool vertical) {
    const Sheet* sheet = wb.find_sheet(r.start.sheet);
    if (!sheet) return false;
    std::vector<double> keys;
    int length = vertical ? r.height() : r.width();
    for (int i = 0; i < length; ++i) {
        int col = vertical ? r.start.col : r.start.col + i;
        int row = vertical ? r.start.row + i : r.start.row;
        Cell c = sheet->cell_at(col, row);
        if (c.is_blank()) continue;
        if (c.kind != Cell::Kind::Number) return false;  // not statically decidable
        keys.push_back(c.number);
    }
    for (size_t i = 1; i < keys.size(); ++i)
        if (keys[i] < keys[i - 1]) return true;
    return false;
}

struct CallCheckContext {
    const Workbook* wb;
    const CellRef* origin;
    const RuleConfig* cfg;
    std::vector<Finding>* out;
    std::string location;
};

inline bool is_range_shaped(const Expr& e) {
    return e.kind == Expr::Kind::RangeReference || e.kind == Expr::Kind::NameReference;
}

inline std::optional<RangeRef> static_range_target(const Expr& e, const CallCheckContext& ctx) {
    if (e.kind == Expr::Kind::RangeReference) {
        RangeRef r = e.range;
        if (r.start.sheet.empty()) {
            r.start.sheet = ctx.origin->sheet;
            r.end.sheet = ctx.origin->sheet;
        }
        return r;
    }
    if (e.kind == Expr::Kind::NameReference) {
        try {
            return resolve_name(*ctx.wb, e.text);
        } catch (const NameError&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

inline void check_calls_walk(const Expr& e, const CallCheckContext& ctx) {
    for (const Expr& a : e.args) check_calls_walk(a, ctx);
    if (e.kind != Expr::Kind::Call) return;

    const auto& table = function_signatures();
    auto sig = table.find(e.text);
    if (sig == table.end()) {
        if (ctx.cfg->rule_enabled("R023"))
            ctx.out->push_back(make_finding(*ctx.cfg, "R023", {ctx.location},
                                            "unknown function " + e.text));
        return;
    }
    if (!ctx.cfg->rule_enabled("R024")) return;

    auto violation = [&](const std::string& what) {
        ctx.out->push_back(
            make_finding(*ctx.cfg, "R024", {ctx.location}, e.text + ": " + what));
    };

    int argc = static_cast<int>(e.args.size());
    if (argc < sig->second.min_args || argc > sig->second.max_args) {
        violation("expects " + std::to_string(sig->second.min_args) +
                  (sig->second.max_args == sig->second.min_args
                       ? ""
                       : ".." + (sig->second.max_args == kMaxCallArgs
                                     ? std::string("255")
                                     : std::to_string(sig->second.max_args))) +
                  " arguments, got " + std::to_string(argc));
        return;
    }

    auto literal_number = [](const Expr& a) -> std::optional<double> {
        if (a.kind == Expr::Kind::Number) return a.number;
        if (a.kind == Expr::Kind::Unary && a.un_op == UnOp::Neg &&
            a.args[0].kind == Expr::Kind::Number)
            return -a.args[0].number;
        return std::nullopt;
    };

    if (e.text == "INDEX" || e.text == "IRR") {
        if (!is_range_shaped(e.args[0])) violation("first argument must be a range");
    }
    if (e.text == "MATCH" || e.text == "VLOOKUP") {
        size_t range_arg = e.text == "MATCH" ? 1 : 1;
        if (!is_range_shaped(e.args[range_arg])) {
            violation("lookup table argument must be a range");
        } else {
            bool approximate = true;
            size_t mode_arg = e.text == "MATCH" ? 2 : 3;
            if (e.args.size() > mode_arg) {
                const Expr& m = e.args[mode_arg];
                if (auto v = literal_number(m)) {
                    if (e.text == "MATCH" && *v != 0.0 && *v != 1.0) {
                        violation("match type must be 0 or 1");
                        approximate = false;  // no point checking sort order too
                    } else {
                        approximate = *v != 0.0;
                    }
                } else if (m.kind == Expr::Kind::Bool) {
                    approximate = m.boolean;
                }
            }
            if (approximate) {
                auto target = static_range_target(e.args[range_arg], ctx);
                if (target && target->area() <= kRangeExpansionCap) {
                    bool vertical = e.text == "VLOOKUP" || target->width() == 1;
                    if (literal_column_unsorted(*ctx.wb, *target, vertical))
                        violation("approximate lookup over a column that is not sorted ascending");
                }
            }
        }
        if (e.text == "VLOOKUP") {
            if (auto v = literal_number(e.args[2])) {
                if (*v < 1.0 || *v != std::trunc(*v))
                    violation("column index must be a positive integer");
            }
            if (e.args.size() == 4) {
                const Expr& m = e.args[3];
                if (m.kind != Expr::Kind::Bool) {
                    if (auto v = literal_number(m)) {
                        if (*v != 0.0 && *v != 1.0) violation("range-lookup flag must be boolean");
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Per-cell formula rules over a built graph: technical errors, dangling
/// references, embedded constants, function misuse, circularity and
/// absolute/relative fixity drift inside copied regions.
inline std::vector<Finding> scan_formula_rules(const Workbook& wb, const DepGraph& g,
                                               const RuleConfig& cfg = RuleConfig{}) {
    cfg.validate();
    std::vector<Finding> out;

    // Stored error literals (R020 covers both stored and in-formula errors).
    if (cfg.rule_enabled("R020")) {
        for (const auto& sheet : wb.sheets)
            for (const auto& [pos, cell] : sheet.cells) {
                if (cell.kind != Cell::Kind::ErrorLiteral) continue;
                CellRef ref{sheet.name, pos.col, pos.row, false, false};
                out.push_back(detail::make_finding(
                    cfg, "R020", {render_a1(ref)},
                    std::string("stored error literal ") + std::string(error_code_text(cell.error))));
            }
    }

    for (size_t id = 0; id < g.nodes.size(); ++id) {
        const auto& node = g.nodes[id];
        if (!node.is_formula) continue;
        CellRef origin = g.ref_of(static_cast<int>(id));
        std::string loc = render_a1(origin);

        if (node.defective) {
            if (cfg.rule_enabled("R027"))
                out.push_back(detail::make_finding(cfg, "R027", {loc},
                                                   "formula source does not parse"));
            continue;
        }
        const FormulaAst& ast = *g.asts[id];

        if (cfg.rule_enabled("R020")) {
            ErrorCode which;
            if (detail::ast_contains_error_literal(ast, which))
                out.push_back(detail::make_finding(
                    cfg, "R020", {loc},
                    std::string("formula embeds error literal ") +
                        std::string(error_code_text(which))));
        }

        if (cfg.rule_enabled("R021")) {
            for (const RefUse& use : g.dangling[id]) {
                std::string what = use.kind == RefUse::Kind::DanglingName
                                       ? "unresolvable name '" + use.raw + "'"
                                       : "reference to unknown sheet in '" + use.raw + "'";
                out.push_back(detail::make_finding(cfg, "R021", {loc}, "dangling reference: " + what));
            }
        }

        if (cfg.rule_enabled("R022")) {
            std::vector<detail::EmbeddedConstant> constants;
            detail::embedded_constants_walk(ast, cfg, constants);
            for (const auto& c : constants)
                out.push_back(detail::make_finding(cfg, "R022", {loc},
                                                   "embedded constant " + c.rendering));
        }

        if (cfg.rule_enabled("R023") || cfg.rule_enabled("R024")) {
            detail::CallCheckContext ctx{&wb, &origin, &cfg, &out, loc};
            detail::check_calls_walk(ast, ctx);
        }
    }

    // R025: one finding per dependency cycle.
    if (cfg.rule_enabled("R025")) {
        for (const auto& cycle : find_circularity(g)) {
            std::vector<std::string> locs;
            for (const CellRef& ref : cycle) locs.push_back(render_a1(ref));
            out.push_back(detail::make_finding(
                cfg, "R025", locs,
                cycle.size() == 1 ? "cell refers to itself"
                                  : "circular dependency among " + std::to_string(cycle.size()) +
                                        " cells"));
        }
    }

    // R026: fixity drift inside copied regions.
    if (cfg.rule_enabled("R026")) {
        struct RunCell {
            CellRef ref;
            std::string skeleton;
            std::vector<uint8_t> fixity;
        };
        auto scan_run = [&](const std::vector<RunCell>& run) {
            if (static_cast<int>(run.size()) < cfg.min_run_length) return;
            std::map<std::string, std::vector<size_t>> by_skeleton;
            for (size_t i = 0; i < run.size(); ++i) by_skeleton[run[i].skeleton].push_back(i);
            for (const auto& [skel, members] : by_skeleton) {
                if (static_cast<int>(members.size()) < cfg.min_run_length) continue;
                std::map<std::vector<uint8_t>, size_t> counts;
                for (size_t i : members) counts[run[i].fixity]++;
                auto majority = counts.end();
                for (auto it = counts.begin(); it != counts.end(); ++it)
                    if (majority == counts.end() || it->second > majority->second) majority = it;
                if (majority->second == members.size()) continue;
                if (static_cast<double>(majority->second) / members.size() < cfg.region_majority)
                    continue;
                for (size_t i : members) {
                    if (run[i].fixity == majority->first) continue;
                    out.push_back(detail::make_finding(
                        cfg, "R026", {render_a1(run[i].ref)},
                        "absolute/relative mix differs from sibling copies in this region"));
                }
            }
        };
        auto collect = [&](int sheet_idx, bool horizontal) {
            const Sheet& sheet = wb.sheets[sheet_idx];
            std::map<int, std::vector<int>> lanes;  // row -> cols or col -> rows
            for (const auto& [pos, cell] : sheet.cells)
                if (cell.is_formula())
                    lanes[horizontal ? pos.row : pos.col].push_back(horizontal ? pos.col : pos.row);
            for (auto& [lane, positions] : lanes) {
                std::sort(positions.begin(), positions.end());
                std::vector<RunCell> run;
                auto flush = [&]() {
                    scan_run(run);
                    run.clear();
                };
                int prev = -10;
                for (int p : positions) {
                    if (p != prev + 1) flush();
                    prev = p;
                    int col = horizontal ? p : lane;
                    int row = horizontal ? lane : p;
                    int id = g.find_node(sheet_idx, col, row);
                    if (id < 0 || !g.asts[id]) {
                        flush();
                        continue;
                    }
                    RunCell rc;
                    rc.ref = g.ref_of(id);
                    rc.skeleton = detail::formula_skeleton(*g.asts[id]);
                    detail::fixity_walk(*g.asts[id], rc.fixity);
                    run.push_back(std::move(rc));
                }
                flush();
            }
        };
        for (size_t si = 0; si < wb.sheets.size(); ++si) {
            collect(static_cast<int>(si), true);
            collect(static_cast<int>(si), false);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Region outliers R030
// ---------------------------------------------------------------------------

/// For every maximal horizontal and vertical run of contiguous formula cells
/// of at least the configured length: when one normalized formula holds a
/// majority at or above the threshold, each minority cell is an outlier.
inline std::vector<Finding> detect_region_outliers(const Workbook& wb,
                                                   const RuleConfig& cfg = RuleConfig{}) {
    cfg.validate();
    std::vector<Finding> out;
    if (!cfg.rule_enabled("R030")) return out;

    struct RunCell {
        CellRef ref;
        std::string normalized;  // "!defective" for unparseable sources
    };
    auto scan_run = [&](const std::vector<RunCell>& run) {
        if (static_cast<int>(run.size()) < cfg.min_run_length) return;
        std::map<std::string, size_t> counts;
        for (const auto& rc : run) counts[rc.normalized]++;
        auto majority = counts.end();
        for (auto it = counts.begin(); it != counts.end(); ++it)
            if (majority == counts.end() || it->second > majority->second) majority = it;
        if (majority->second == run.size()) return;
        if (static_cast<double>(majority->second) / run.size() < cfg.region_majority) return;
        std::string region = render_a1(run.front().ref) + ":" + render_a1_local(run.back().ref);
        for (const auto& rc : run) {
            if (rc.normalized == majority->first) continue;
            out.push_back(detail::make_finding(
                cfg, "R030", {render_a1(rc.ref)},
                "formula differs from the dominant pattern of region " + region));
        }
    };

    for (const auto& sheet : wb.sheets) {
        for (bool horizontal : {true, false}) {
            std::map<int, std::vector<int>> lanes;
            for (const auto& [pos, cell] : sheet.cells)
                if (cell.is_formula())
                    lanes[horizontal ? pos.row : pos.col].push_back(horizontal ? pos.col : pos.row);
            for (auto& [lane, positions] : lanes) {
                std::sort(positions.begin(), positions.end());
                std::vector<RunCell> run;
                int prev = -10;
                for (int p : positions) {
                    if (p != prev + 1) {
                        scan_run(run);
                        run.clear();
                    }
                    prev = p;
                    int col = horizontal ? p : lane;
                    int row = horizontal ? lane : p;
                    CellRef ref{sheet.name, col, row, false, false};
                    RunCell rc;
                    rc.ref = ref;
                    try {
                        rc.normalized = normalize_r1c1(parse_formula(sheet.cell_at(col, row).text),
                                                       ref).text;
                    } catch (const ParseError&) {
                        rc.normalized = "!defective:" + render_a1_local(ref);
                    }
                    run.push_back(std::move(rc));
                }
                scan_run(run);
                run.clear();
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonical ordering and the combined low-level pass
// ---------------------------------------------------------------------------

/// Deterministic finding order: workbook-level (name) findings first by rule
/// then message, then cell findings by sheet order, row, column, rule code.
inline void sort_findings(std::vector<Finding>& findings, const Workbook& wb) {
    auto key = [&](const Finding& f) {
        int sheet = 1 << 20;
        int row = 0, col = 0;
        int group = 0;
        if (!f.locations.empty() && f.locations.front().rfind("name:", 0) != 0) {
            group = 1;
            if (auto r = parse_range_text(f.locations.front())) {
                int idx = wb.sheet_index(r->start.sheet);
                sheet = idx < 0 ? (1 << 20) : idx;
                row = r->start.row;
                col = r->start.col;
            }
        }
        return std::tuple<int, int, int, int, std::string, std::string>(
            group, sheet, row, col, f.rule_code, f.message);
    };
    std::stable_sort(findings.begin(), findings.end(),
                     [&](const Finding& a, const Finding& b) { return key(a) < key(b); });
}

inline void assign_finding_ids(std::vector<Finding>& findings, long first_id = 1) {
    for (auto& f : findings) f.id = first_id++;
}

/// The whole low-level pass in canonical order with ids assigned.
inline std::vector<Finding> run_lowlevel_checks(const Workbook& wb, const DepGraph& g,
                                                const RuleConfig& cfg = RuleConfig{}) {
    std::vector<Finding> findings = check_named_ranges(wb, cfg);
    for (auto& f : scan_formula_rules(wb, g, cfg)) findings.push_back(std::move(f));
    for (auto& f : detect_region_outliers(wb, cfg)) findings.push_back(std::move(f));
    sort_findings(findings, wb);
    assign_finding_ids(findings);
    return findings;
}

}  // namespace cellsentry
