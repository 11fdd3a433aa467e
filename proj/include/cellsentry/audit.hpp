#pragma once

// Full audit pipeline orchestration: familiarisation (fingerprint + metrics),
// low-level rules, recalculation with cached-value verification, gated
// high-level assertions, sensitivities, and the evidence artifacts.

#include <ctime>
#include <fcntl.h>
#include <unistd.h>

#include "cellsentry/diff.hpp"
#include "cellsentry/papertrail.hpp"
#include "cellsentry/rules.hpp"

namespace cellsentry {

struct EngagementConfig {
    RuleConfig rules;
    std::optional<std::filesystem::path> schema_path;
    std::optional<std::filesystem::path> scenario_path;
    Severity fail_threshold = Severity::Warning;
    std::string liability_statement =
        "Liability for this engagement is capped at the amount agreed in the engagement letter.";
    ReportMode report_mode = ReportMode::AgreedProcedures;
    std::filesystem::path out_dir = "audit_out";
    double formulas_per_hour = kDefaultFormulasPerHour;
    double cached_tolerance = 1e-9;
    bool force_highlevel = false;
};

inline EngagementConfig load_engagement_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    EngagementConfig cfg;
    std::filesystem::path base = path.parent_path();
    if (doc.contains("rules")) cfg.rules = rule_config_from_json(doc.at("rules"));
    if (doc.contains("schema")) cfg.schema_path = base / doc.at("schema").get<std::string>();
    if (doc.contains("scenarios"))
        cfg.scenario_path = base / doc.at("scenarios").get<std::string>();
    if (doc.contains("fail_threshold")) {
        auto sev = parse_severity(doc.at("fail_threshold").get<std::string>());
        if (!sev) throw ConfigError(path.string() + ": unknown fail_threshold");
        cfg.fail_threshold = *sev;
    }
    if (doc.contains("liability_statement"))
        cfg.liability_statement = doc.at("liability_statement").get<std::string>();
    if (doc.contains("report_mode")) {
        auto mode = parse_report_mode(doc.at("report_mode").get<std::string>());
        if (!mode) throw ConfigError(path.string() + ": unknown report_mode");
        cfg.report_mode = *mode;
    }
    if (doc.contains("out_dir")) cfg.out_dir = base / doc.at("out_dir").get<std::string>();
    if (doc.contains("formulas_per_hour"))
        cfg.formulas_per_hour = doc.at("formulas_per_hour").get<double>();
    if (doc.contains("cached_tolerance"))
        cfg.cached_tolerance = doc.at("cached_tolerance").get<double>();
    return cfg;
}

inline std::string iso_utc_now() {
    std::time_t t = std::time(nullptr);
    struct tm tmv{};
    gmtime_r(&t, &tmv);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tmv);
    return buf;
}

/// One audit process per output directory, enforced with an exclusive lock
/// file that disappears with this handle.
class OutputDirLock {
public:
    explicit OutputDirLock(const std::filesystem::path& dir) : path_(dir / "audit.lock") {
        std::filesystem::create_directories(dir);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw IoError("output directory is locked by another audit: " + path_.string());
        std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] ssize_t n = ::write(fd_, pid.data(), pid.size());
    }
    ~OutputDirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    OutputDirLock(const OutputDirLock&) = delete;
    OutputDirLock& operator=(const OutputDirLock&) = delete;

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

struct AuditOutcome {
    ModelFingerprint fingerprint;
    Metrics metrics;
    std::vector<Finding> findings;  // low-level + cached + high-level, canonical order
    std::vector<AssertionResult> assertions;
    std::vector<ScenarioResult> scenario_results;
    RecalcResult recalc;
    bool highlevel_gated = false;  // skipped because unresolved error findings exist
    AuditReport report;

    size_t findings_at_or_above(Severity threshold) const {
        size_t n = 0;
        for (const auto& f : findings)
            if (static_cast<int>(f.severity) >= static_cast<int>(threshold)) ++n;
        return n;
    }
};

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    write_text_file(path, j.dump(1) + "\n");
}

}  // namespace detail

inline json values_to_json(const RecalcResult& recalc) {
    json values = json::object();
    for (const auto& [ref, value] : recalc.values) values[render_a1(ref)] = value_to_json(value);
    json cycles = json::array(), errors = json::array(), order = json::array();
    for (const auto& c : recalc.cycle_cells) cycles.push_back(render_a1(c));
    for (const auto& c : recalc.cells_in_error) errors.push_back(render_a1(c));
    for (const auto& c : recalc.evaluation_order) order.push_back(render_a1(c));
    return json{{"values", values},
                {"cycle_cells", cycles},
                {"cells_in_error", errors},
                {"evaluation_order", order}};
}

/// The whole pipeline in the review order: familiarisation, low level, high
/// level, sensitivities, report. Artifacts land in `config.out_dir` when
/// `write_artifacts` is set.
inline AuditOutcome run_audit(const std::filesystem::path& model_path,
                              const EngagementConfig& config, bool write_artifacts = true,
                              bool run_sensitivities = true,
                              const std::string& timestamp = std::string()) {
    std::string now = timestamp.empty() ? iso_utc_now() : timestamp;
    std::optional<OutputDirLock> lock;
    if (write_artifacts) lock.emplace(config.out_dir);

    AuditOutcome outcome;
    std::vector<std::string> procedures;

    // Familiarisation: identify the model, load it, size the review.
    outcome.fingerprint = fingerprint_model(model_path);
    Workbook wb = load_workbook(model_path);
    DepGraph graph = build_graph(wb);
    outcome.metrics = compute_metrics(wb, graph, config.formulas_per_hour);
    procedures.push_back("model identification (name, size, timestamp, SHA-256)");
    procedures.push_back("structure appraisal and review-effort metrics");

    // Low-level review.
    std::vector<Finding> findings = check_named_ranges(wb, config.rules);
    for (auto& f : scan_formula_rules(wb, graph, config.rules)) findings.push_back(std::move(f));
    for (auto& f : detect_region_outliers(wb, config.rules)) findings.push_back(std::move(f));
    procedures.push_back("low-level rule catalogue (ranges, references, constants, functions, "
                         "circularity, copy regions)");

    // Recalculation and cached-value verification.
    outcome.recalc = recalculate_with_graph(wb, graph);
    for (auto& f : verify_cached_values(wb, outcome.recalc, config.cached_tolerance))
        findings.push_back(std::move(f));
    procedures.push_back("full recalculation and author-cached value verification (tolerance " +
                         render_number(config.cached_tolerance) + ")");

    // High-level review, gated on unresolved error-severity findings.
    std::optional<FinancialSchema> schema;
    if (config.schema_path) schema = load_schema(*config.schema_path, wb);
    if (schema) {
        bool blocking = false;
        for (const auto& f : findings)
            if (f.severity == Severity::Error && f.status == FindingStatus::Open) blocking = true;
        if (blocking && !config.force_highlevel) {
            outcome.highlevel_gated = true;
            for (const char* code : {"H001", "H002", "H003", "H004", "H005", "H006"}) {
                AssertionResult r;
                r.code = code;
                r.ran = false;
                r.note = "gated: unresolved error-severity low-level findings";
                outcome.assertions.push_back(std::move(r));
            }
            procedures.push_back(
                "high-level review WITHHELD pending correction of error-severity findings");
        } else {
            outcome.assertions = run_financial_assertions(wb, outcome.recalc, *schema);
            for (auto& f : assertion_findings(outcome.assertions, *schema))
                findings.push_back(std::move(f));
            procedures.push_back("high-level financial assertions (H001-H006)");
        }
    } else {
        procedures.push_back("high-level review: no financial schema configured (not run)");
    }

    sort_findings(findings, wb);
    assign_finding_ids(findings);
    outcome.findings = std::move(findings);

    // Sensitivities.
    if (run_sensitivities && config.scenario_path) {
        auto suite = load_scenario_suite(*config.scenario_path);
        std::optional<std::filesystem::path> sens_dir;
        if (write_artifacts) sens_dir = config.out_dir / "sensitivity";
        outcome.scenario_results = run_sensitivity_suite(wb, suite, sens_dir);
        procedures.push_back("sensitivity suite (" + std::to_string(suite.size()) +
                             " scenarios plus base case)");
    } else if (config.scenario_path) {
        procedures.push_back("sensitivities: configured but not run in this invocation");
    } else {
        procedures.push_back("sensitivities: no scenario suite configured (not run)");
    }

    // Evidence artifacts.
    std::vector<SheetCoverage> coverage;
    if (write_artifacts) {
        const auto& out = config.out_dir;
        detail::write_json_file(out / "fingerprint.json", fingerprint_to_json(outcome.fingerprint));
        detail::write_json_file(out / "metrics.json", metrics_to_json(outcome.metrics));
        detail::write_text_file(out / "edges.txt", render_edge_list(graph));
        FindingsStore::from_findings(outcome.findings).save(out / "findings.jsonl");
        detail::write_json_file(out / "values.json", values_to_json(outcome.recalc));
        detail::write_json_file(out / "assertions.json",
                                assertion_results_to_json(outcome.assertions));
        std::filesystem::create_directories(out / "maps");
        for (size_t i = 0; i < wb.sheets.size(); ++i) {
            std::string stem = std::to_string(i + 1) + "_" + wb.sheets[i].name;
            for (char& c : stem)
                if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
            detail::write_text_file(
                out / "maps" / (stem + ".type.txt"),
                cell_map_text(render_cell_map(wb, wb.sheets[i].name, MapMode::Type),
                              static_cast<int>(i + 1)));
            detail::write_text_file(
                out / "maps" / (stem + ".clone.txt"),
                cell_map_text(render_cell_map(wb, wb.sheets[i].name, MapMode::Clone),
                              static_cast<int>(i + 1)));
        }
        CoverageLedger ledger = make_coverage_ledger(outcome.fingerprint);
        save_coverage_ledger(ledger, out / "coverage.jsonl");
        coverage = coverage_status(ledger, wb);
        procedures.push_back("cell maps printed and coverage ledger initialised");
    }

    outcome.report = emit_report(outcome.fingerprint, procedures, outcome.metrics,
                                 outcome.findings, outcome.assertions,
                                 summarize_sensitivity(outcome.scenario_results), coverage,
                                 config.liability_statement, config.report_mode, now);
    if (write_artifacts) {
        detail::write_json_file(config.out_dir / "report.json", report_to_json(outcome.report));
        detail::write_text_file(config.out_dir / "report.txt", report_to_text(outcome.report));
    }
    return outcome;
}

}  // namespace cellsentry
