#pragma once

// The audit evidence layer: printable cell-type maps, the append-only
// reviewer sign-off ledger bound to a model fingerprint, the findings
// lifecycle store, and the final report in text and machine form.

#include "cellsentry/financial.hpp"
#include "cellsentry/findings.hpp"
#include "cellsentry/graph.hpp"
#include "cellsentry/sensitivity.hpp"

namespace cellsentry {

struct LedgerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Cell maps
// ---------------------------------------------------------------------------

enum class MapMode { Type, Clone };

/// Single-character map of one sheet. Type mode: L label, N number, B bool,
/// E error literal, F formula, '.' blank. Clone mode marks formula copies:
/// F first occurrence, '<' copy of the cell to the left, '^' copy of the
/// cell above, 'c' copy of a non-adjacent original.
struct CellMap {
    std::string sheet;
    int min_col = 1, min_row = 1;
    int width = 0, height = 0;
    std::vector<std::string> rows;

    char at(int col, int row) const {  // 1-based sheet coordinates
        return rows[row - min_row][col - min_col];
    }
};

inline CellMap render_cell_map(const Workbook& wb, const std::string& sheet_name, MapMode mode) {
    const Sheet* sheet = wb.find_sheet(sheet_name);
    if (!sheet) throw NameError("unknown sheet '" + sheet_name + "'");
    CellMap map;
    map.sheet = sheet->name;
    auto bounds = sheet->used_bounds();
    if (!bounds) return map;  // 0 x 0
    map.min_col = (*bounds)[0];
    map.min_row = (*bounds)[1];
    map.width = (*bounds)[2] - map.min_col + 1;
    map.height = (*bounds)[3] - map.min_row + 1;
    map.rows.assign(map.height, std::string(map.width, '.'));

    std::map<std::string, GridPos> first_occurrence;
    std::map<GridPos, std::string> norm_of;
    if (mode == MapMode::Clone) {
        for (const auto& [pos, cell] : sheet->cells) {
            if (!cell.is_formula()) continue;
            CellRef origin{sheet->name, pos.col, pos.row, false, false};
            std::string norm;
            try {
                norm = normalize_r1c1(parse_formula(cell.text), origin).text;
            } catch (const ParseError&) {
                norm = "!defective:" + render_a1_local(origin);
            }
            norm_of[pos] = norm;
            first_occurrence.emplace(norm, pos);  // row-major scan keeps the first
        }
    }

    for (const auto& [pos, cell] : sheet->cells) {
        char code = '.';
        switch (cell.kind) {
            case Cell::Kind::Blank: continue;
            case Cell::Kind::Label: code = 'L'; break;
            case Cell::Kind::Number: code = 'N'; break;
            case Cell::Kind::Bool: code = 'B'; break;
            case Cell::Kind::ErrorLiteral: code = 'E'; break;
            case Cell::Kind::Formula: code = 'F'; break;
        }
        if (mode == MapMode::Clone && cell.is_formula()) {
            const std::string& norm = norm_of[pos];
            GridPos first = first_occurrence[norm];
            if (first == pos) {
                code = 'F';
            } else {
                auto left = norm_of.find(GridPos{pos.row, pos.col - 1});
                auto above = norm_of.find(GridPos{pos.row - 1, pos.col});
                if (left != norm_of.end() && left->second == norm) code = '<';
                else if (above != norm_of.end() && above->second == norm) code = '^';
                else code = 'c';
            }
        }
        map.rows[pos.row - map.min_row][pos.col - map.min_col] = code;
    }
    return map;
}

/// Fixed-width print rendering with row/column rulers for the print-and-sign
/// documentation trail.
inline std::string cell_map_text(const CellMap& map, int sheet_number) {
    std::string out = "Sheet " + std::to_string(sheet_number) + ": " + map.sheet;
    if (map.width == 0) return out + "  (empty)\n";
    CellRef tl{map.sheet, map.min_col, map.min_row, false, false};
    CellRef br{map.sheet, map.min_col + map.width - 1, map.min_row + map.height - 1, false, false};
    out += "  (" + render_a1_local(tl) + ":" + render_a1_local(br) + ")\n";

    int row_digits = static_cast<int>(std::to_string(map.min_row + map.height - 1).size());
    std::string margin(row_digits + 2, ' ');

    // Column ruler: block labels every 10 columns, then one letter per column.
    std::string labels = margin, letters = margin;
    for (int c = 0; c < map.width; ++c) {
        int col = map.min_col + c;
        std::string name = col_to_name(col);
        if (c % 10 == 0) {
            std::string tag = name.substr(0, std::min<size_t>(name.size(), 10));
            labels += tag;
            int pad = 10 - static_cast<int>(tag.size());
            for (int i = 0; i < pad && c + static_cast<int>(tag.size()) + i < map.width; ++i)
                labels += ' ';
        }
        letters += name.back();
    }
    out += labels.substr(0, margin.size() + map.width) + "\n" + letters + "\n";

    for (int r = 0; r < map.height; ++r) {
        std::string num = std::to_string(map.min_row + r);
        out += std::string(row_digits - num.size(), ' ') + num + "  " + map.rows[r] + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Coverage ledger
// ---------------------------------------------------------------------------

struct SignoffEntry {
    std::string sheet;
    std::string cell;  // local A1 text
    std::string reviewer;
    std::string timestamp;
    std::string phase;

    friend bool operator==(const SignoffEntry&, const SignoffEntry&) = default;
};

/// Append-only sign-off trail bound to one model fingerprint. Sign-offs
/// against any other model version are rejected: they would be evidentially
/// worthless.
struct CoverageLedger {
    ModelFingerprint fingerprint;
    std::vector<SignoffEntry> entries;
};

inline CoverageLedger make_coverage_ledger(const ModelFingerprint& fp) {
    CoverageLedger ledger;
    ledger.fingerprint = fp;
    return ledger;
}

/// One entry per member cell; prior entries are never touched. Two reviewers
/// signing the same cell is legitimate independent inspection.
inline void record_signoff(CoverageLedger& ledger, const Workbook& wb,
                           const ModelFingerprint& current, const RangeRef& cells,
                           const std::string& reviewer, const std::string& phase,
                           const std::string& timestamp) {
    if (ledger.fingerprint.content_hash != current.content_hash)
        throw LedgerError("ledger is bound to model " + ledger.fingerprint.content_hash.substr(0, 12) +
                          "..., refusing sign-off against " + current.content_hash.substr(0, 12) +
                          "...");
    const Sheet* sheet = wb.find_sheet(cells.start.sheet);
    if (!sheet) throw LedgerError("sign-off sheet '" + cells.start.sheet + "' does not exist");
    if (!cells.start.in_bounds() || !cells.end.in_bounds())
        throw LedgerError("sign-off range out of bounds");
    for (int row = cells.start.row; row <= cells.end.row; ++row)
        for (int col = cells.start.col; col <= cells.end.col; ++col) {
            SignoffEntry e;
            e.sheet = sheet->name;
            e.cell = col_to_name(col) + std::to_string(row);
            e.reviewer = reviewer;
            e.timestamp = timestamp;
            e.phase = phase;
            ledger.entries.push_back(std::move(e));
        }
}

inline void save_coverage_ledger(const CoverageLedger& ledger, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    json header = {{"kind", "header"}, {"fingerprint", fingerprint_to_json(ledger.fingerprint)}};
    out << header.dump() << "\n";
    for (const auto& e : ledger.entries)
        out << json{{"kind", "signoff"}, {"sheet", e.sheet},    {"cell", e.cell},
                    {"reviewer", e.reviewer}, {"ts", e.timestamp}, {"phase", e.phase}}
                   .dump()
            << "\n";
}

inline CoverageLedger load_coverage_ledger(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CoverageLedger ledger;
    std::string line;
    bool have_header = false;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": bad JSON line");
        std::string kind = j.value("kind", "");
        if (kind == "header") {
            ledger.fingerprint = fingerprint_from_json(j.at("fingerprint"));
            have_header = true;
        } else if (kind == "signoff") {
            SignoffEntry e;
            e.sheet = j.at("sheet").get<std::string>();
            e.cell = j.at("cell").get<std::string>();
            e.reviewer = j.at("reviewer").get<std::string>();
            e.timestamp = j.at("ts").get<std::string>();
            e.phase = j.at("phase").get<std::string>();
            ledger.entries.push_back(std::move(e));
        } else {
            throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                              ": unknown record kind");
        }
    }
    if (!have_header) throw SchemaError(path.string() + ": ledger missing header record");
    return ledger;
}

struct SheetCoverage {
    std::string sheet;
    size_t signed_cells = 0;   // distinct signed non-blank cells
    size_t total_cells = 0;    // non-blank cells
    double percent = 100.0;
    bool zero_denominator = false;
    std::vector<std::string> unsigned_cells;

    friend bool operator==(const SheetCoverage&, const SheetCoverage&) = default;
};

/// Per-sheet coverage: signed non-blank cells over total non-blank cells.
/// Blank-only sheets report 100% with the zero denominator flagged.
inline std::vector<SheetCoverage> coverage_status(const CoverageLedger& ledger,
                                                  const Workbook& wb) {
    std::map<std::string, std::set<std::string>> signed_by_sheet;
    for (const auto& e : ledger.entries)
        signed_by_sheet[detail::upper_copy(e.sheet)].insert(e.cell);

    std::vector<SheetCoverage> out;
    for (const auto& sheet : wb.sheets) {
        SheetCoverage cov;
        cov.sheet = sheet.name;
        const auto& signed_cells = signed_by_sheet[detail::upper_copy(sheet.name)];
        for (const auto& [pos, cell] : sheet.cells) {
            ++cov.total_cells;
            std::string a1 = col_to_name(pos.col) + std::to_string(pos.row);
            if (signed_cells.count(a1)) ++cov.signed_cells;
            else cov.unsigned_cells.push_back(a1);
        }
        if (cov.total_cells == 0) {
            cov.percent = 100.0;
            cov.zero_denominator = true;
        } else {
            cov.percent = 100.0 * static_cast<double>(cov.signed_cells) / cov.total_cells;
        }
        out.push_back(std::move(cov));
    }
    return out;
}

inline json coverage_to_json(const std::vector<SheetCoverage>& cov) {
    json arr = json::array();
    for (const auto& c : cov)
        arr.push_back(json{{"sheet", c.sheet},
                           {"signed", c.signed_cells},
                           {"total", c.total_cells},
                           {"percent", c.percent},
                           {"zero_denominator", c.zero_denominator},
                           {"unsigned", c.unsigned_cells}});
    return arr;
}

inline std::vector<SheetCoverage> coverage_from_json(const json& arr) {
    std::vector<SheetCoverage> out;
    for (const auto& j : arr) {
        SheetCoverage c;
        c.sheet = j.at("sheet").get<std::string>();
        c.signed_cells = j.at("signed").get<size_t>();
        c.total_cells = j.at("total").get<size_t>();
        c.percent = j.at("percent").get<double>();
        c.zero_denominator = j.at("zero_denominator").get<bool>();
        c.unsigned_cells = j.at("unsigned").get<std::vector<std::string>>();
        out.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Findings store (the "simple error management system")
// ---------------------------------------------------------------------------

struct FindingTransition {
    long id = 0;
    FindingStatus to = FindingStatus::Corrected;
    std::string note;
    int iteration = 1;
    std::string timestamp;
};

/// Event-sourced findings store: creation and transition events are appended,
/// never rewritten, so the full feedback history survives.
class FindingsStore {
public:
    static FindingsStore from_findings(const std::vector<Finding>& findings) {
        FindingsStore store;
        for (const Finding& f : findings) {
            store.current_[f.id] = f;
            json j = finding_to_json(f);
            j["kind"] = "finding";
            store.log_.push_back(std::move(j));
        }
        return store;
    }

    const std::map<long, Finding>& current() const { return current_; }
    const std::vector<json>& log() const { return log_; }

    std::vector<Finding> findings() const {
        std::vector<Finding> out;
        for (const auto& [id, f] : current_) out.push_back(f);
        return out;
    }

    /// Applies one lifecycle transition; history is preserved as a new event.
    void manage_finding(long id, FindingStatus to, const std::string& note, int iteration,
                        const std::string& timestamp) {
        auto it = current_.find(id);
        if (it == current_.end())
            throw LedgerError("unknown finding id " + std::to_string(id));
        if (!is_legal_transition(it->second.status, to))
            throw LedgerError("illegal transition " +
                              std::string(status_text(it->second.status)) + " -> " +
                              std::string(status_text(to)) + " for finding " + std::to_string(id));
        it->second.status = to;
        it->second.iteration = iteration;
        log_.push_back(json{{"kind", "transition"},
                            {"id", id},
                            {"to", std::string(status_text(to))},
                            {"note", note},
                            {"iteration", iteration},
                            {"ts", timestamp}});
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        for (const json& j : log_) out << j.dump() << "\n";
    }

    static FindingsStore load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path.string());
        FindingsStore store;
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": bad JSON line");
            std::string kind = j.value("kind", "");
            if (kind == "finding") {
                Finding f = finding_from_json(j);
                store.current_[f.id] = f;
                store.log_.push_back(j);
            } else if (kind == "transition") {
                long id = j.at("id").get<long>();
                auto st = parse_status(j.at("to").get<std::string>());
                auto it = store.current_.find(id);
                if (!st || it == store.current_.end())
                    throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                                      ": transition for unknown finding");
                it->second.status = *st;
                it->second.iteration = j.at("iteration").get<int>();
                store.log_.push_back(j);
            } else {
                throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                                  ": unknown record kind");
            }
        }
        return store;
    }

private:
    std::map<long, Finding> current_;
    std::vector<json> log_;
};

// ---------------------------------------------------------------------------
// Final report
// ---------------------------------------------------------------------------

enum class ReportMode { AgreedProcedures, MaterialErrorOpinion };

inline std::string_view report_mode_text(ReportMode m) {
    return m == ReportMode::AgreedProcedures ? "agreed_procedures" : "material_error_opinion";
}

inline std::optional<ReportMode> parse_report_mode(std::string_view s) {
    if (s == "agreed_procedures" || s == "agreed") return ReportMode::AgreedProcedures;
    if (s == "material_error_opinion" || s == "opinion") return ReportMode::MaterialErrorOpinion;
    return std::nullopt;
}

struct SensitivitySummary {
    std::string scenario;
    size_t output_count = 0;
    size_t error_cell_count = 0;
    bool expectations_pass = true;

    friend bool operator==(const SensitivitySummary&, const SensitivitySummary&) = default;
};

inline std::vector<SensitivitySummary> summarize_sensitivity(
    const std::vector<ScenarioResult>& results) {
    std::vector<SensitivitySummary> out;
    for (const auto& r : results)
        out.push_back({r.scenario, r.outputs.size(), r.error_cells.size(), r.expectations_pass});
    return out;
}

struct AuditReport {
    ModelFingerprint fingerprint;
    std::vector<std::string> procedures_performed;
    std::optional<Metrics> metrics;
    std::vector<Finding> findings;
    std::vector<AssertionResult> assertions;
    std::vector<SensitivitySummary> sensitivity;
    std::vector<SheetCoverage> coverage;
    std::string liability_statement;
    ReportMode mode = ReportMode::AgreedProcedures;
    std::string generated_at;  // the one volatile field
};

/// Assembles the report value. Unresolved issues (open or waived findings)
/// are always carried; the fingerprint is mandatory.
inline AuditReport emit_report(const ModelFingerprint& fingerprint,
                               std::vector<std::string> procedures,
                               std::optional<Metrics> metrics, std::vector<Finding> findings,
                               std::vector<AssertionResult> assertions,
                               std::vector<SensitivitySummary> sensitivity,
                               std::vector<SheetCoverage> coverage,
                               std::string liability_statement, ReportMode mode,
                               std::string generated_at) {
    if (fingerprint.content_hash.empty())
        throw LedgerError("report requires a model fingerprint");
    AuditReport r;
    r.fingerprint = fingerprint;
    r.procedures_performed = std::move(procedures);
    r.metrics = std::move(metrics);
    r.findings = std::move(findings);
    r.assertions = std::move(assertions);
    r.sensitivity = std::move(sensitivity);
    r.coverage = std::move(coverage);
    r.liability_statement = std::move(liability_statement);
    r.mode = mode;
    r.generated_at = std::move(generated_at);
    return r;
}

inline std::vector<const Finding*> unresolved_findings(const AuditReport& r) {
    std::vector<const Finding*> out;
    for (const auto& f : r.findings)
        if (f.status == FindingStatus::Open || f.status == FindingStatus::Waived)
            out.push_back(&f);
    return out;
}

inline json report_to_json(const AuditReport& r) {
    json findings = json::array();
    for (const auto& f : r.findings) findings.push_back(finding_to_json(f));
    json sens = json::array();
    for (const auto& s : r.sensitivity)
        sens.push_back(json{{"scenario", s.scenario},
                            {"output_count", s.output_count},
                            {"error_cell_count", s.error_cell_count},
                            {"expectations_pass", s.expectations_pass}});
    json j{{"fingerprint", fingerprint_to_json(r.fingerprint)},
           {"procedures_performed", r.procedures_performed},
           {"findings", findings},
           {"assertions", assertion_results_to_json(r.assertions)},
           {"sensitivity", sens},
           {"coverage", coverage_to_json(r.coverage)},
           {"liability_statement", r.liability_statement},
           {"mode", std::string(report_mode_text(r.mode))},
           {"generated_at", r.generated_at}};
    if (r.metrics) j["metrics"] = metrics_to_json(*r.metrics);
    return j;
}

inline AuditReport report_from_json(const json& j) {
    AuditReport r;
    r.fingerprint = fingerprint_from_json(j.at("fingerprint"));
    r.procedures_performed = j.at("procedures_performed").get<std::vector<std::string>>();
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        Metrics mm;
        mm.total_cells = m.at("total_cells").get<size_t>();
        mm.formula_cells = m.at("formula_cells").get<size_t>();
        mm.unique_formula_count = m.at("unique_formula_count").get<size_t>();
        mm.repeated_cells = m.at("repeated_cells").get<size_t>();
        mm.repeated_per_original = m.at("repeated_per_original").get<double>();
        for (auto it = m.at("formula_length_histogram").begin();
             it != m.at("formula_length_histogram").end(); ++it)
            mm.formula_length_histogram[std::atoi(it.key().c_str())] = it.value().get<size_t>();
        mm.max_precedents = m.at("max_precedents").get<size_t>();
        mm.mean_precedents = m.at("mean_precedents").get<double>();
        mm.max_dependents = m.at("max_dependents").get<size_t>();
        mm.mean_dependents = m.at("mean_dependents").get<double>();
        mm.cross_sheet_edge_count = m.at("cross_sheet_edge_count").get<size_t>();
        for (auto it = m.at("locality_histogram").begin(); it != m.at("locality_histogram").end();
             ++it)
            mm.locality_histogram[it.key()] = it.value().get<size_t>();
        mm.estimated_review_hours = m.at("estimated_review_hours").get<double>();
        r.metrics = mm;
    }
    for (const auto& f : j.at("findings")) r.findings.push_back(finding_from_json(f));
    r.assertions = assertion_results_from_json(j.at("assertions"));
    for (const auto& s : j.at("sensitivity"))
        r.sensitivity.push_back(SensitivitySummary{s.at("scenario").get<std::string>(),
                                                   s.at("output_count").get<size_t>(),
                                                   s.at("error_cell_count").get<size_t>(),
                                                   s.at("expectations_pass").get<bool>()});
    r.coverage = coverage_from_json(j.at("coverage"));
    r.liability_statement = j.at("liability_statement").get<std::string>();
    auto mode = parse_report_mode(j.at("mode").get<std::string>());
    if (!mode) throw SchemaError("report: unknown mode");
    r.mode = *mode;
    r.generated_at = j.at("generated_at").get<std::string>();
    return r;
}

inline std::string report_to_text(const AuditReport& r) {
    std::string out;
    auto line = [&](const std::string& s) { out += s + "\n"; };
    line("MODEL AUDIT REPORT");
    line("==================");
    line("");
    line("Model identification:");
    line("  file name : " + r.fingerprint.file_name);
    line("  size      : " + std::to_string(r.fingerprint.byte_size) + " bytes");
    line("  modified  : " + r.fingerprint.modified_timestamp);
    line("  sha-256   : " + r.fingerprint.content_hash);
    line("");
    line("Procedures performed:");
    for (const auto& p : r.procedures_performed) line("  - " + p);
    if (r.procedures_performed.empty()) line("  (none)");
    line("");
    if (r.metrics) {
        const Metrics& m = *r.metrics;
        line("Model metrics:");
        line("  cells " + std::to_string(m.total_cells) + ", formulas " +
             std::to_string(m.formula_cells) + ", unique formulas " +
             std::to_string(m.unique_formula_count) + " (original:repeated 1:" +
             render_number(m.repeated_per_original) + ")");
        line("  precedents max " + std::to_string(m.max_precedents) + " mean " +
             render_number(m.mean_precedents) + "; dependents max " +
             std::to_string(m.max_dependents) + " mean " + render_number(m.mean_dependents));
        line("  cross-sheet links " + std::to_string(m.cross_sheet_edge_count));
        line("  estimated review effort " + render_number(m.estimated_review_hours) +
             " hours (linear throughput assumption; see docs)");
        line("");
    }
    line("Findings:");
    if (r.findings.empty()) {
        line("  none");
    } else {
        std::map<std::string, std::map<std::string, size_t>> by_rule;
        for (const auto& f : r.findings)
            by_rule[f.rule_code][std::string(status_text(f.status))]++;
        for (const auto& [rule, statuses] : by_rule) {
            std::string s = "  " + rule + ":";
            for (const auto& [status, count] : statuses)
                s += " " + std::to_string(count) + " " + status;
            line(s);
        }
    }
    line("");
    line("High-level assertions:");
    for (const auto& a : r.assertions) {
        std::string status = !a.ran ? "NOT RUN" : a.pass ? "pass" : "FAIL";
        std::string s = "  " + a.code + " " + a.title + ": " + status;
        if (a.ran && !a.pass) {
            s += " (periods";
            for (int t : a.failing_periods) s += " " + std::to_string(t);
            s += ", worst deviation " + render_number(a.worst_abs_deviation) + ")";
        }
        line(s);
    }
    if (r.assertions.empty()) line("  (not run)");
    line("");
    line("Sensitivities:");
    for (const auto& s : r.sensitivity)
        line("  " + s.scenario + ": " + std::to_string(s.output_count) + " outputs, " +
             std::to_string(s.error_cell_count) + " error cells" +
             (s.expectations_pass ? "" : ", EXPECTATIONS FAILED"));
    if (r.sensitivity.empty()) line("  (not run)");
    line("");
    line("Review coverage:");
    for (const auto& c : r.coverage) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f%%", c.percent);
        line("  " + c.sheet + ": " + buf + " (" + std::to_string(c.signed_cells) + "/" +
             std::to_string(c.total_cells) + (c.zero_denominator ? ", no reviewable cells)" : ")"));
    }
    if (r.coverage.empty()) line("  (no ledger)");
    line("");
    auto unresolved = unresolved_findings(r);
    if (!unresolved.empty()) {
        line("Unresolved issues:");
        for (const Finding* f : unresolved) {
            std::string locs;
            for (size_t i = 0; i < f->locations.size() && i < 4; ++i)
                locs += (i ? ", " : "") + f->locations[i];
            if (f->locations.size() > 4) locs += ", ...";
            line("  [" + std::string(status_text(f->status)) + "] " + f->rule_code + " at " + locs +
                 ": " + f->message);
        }
        line("");
    }
    line("Report wording:");
    if (r.mode == ReportMode::AgreedProcedures) {
        line("  The agreed-upon procedures listed above have been performed on the");
        line("  identified model. This report does not express an opinion beyond the");
        line("  results of those procedures.");
    } else {
        line("  On the basis of the procedures listed above, nothing has come to our");
        line("  attention to suggest the identified model contains material error,");
        line("  other than any unresolved issues documented in this report.");
    }
    line("");
    line("Liability:");
    line("  " + r.liability_statement);
    line("");
    line("Generated at: " + r.generated_at);
    return out;
}

}  // namespace cellsentry
