#pragma once

// Command-line surface. Machine-readable output goes to stdout; human
// commentary goes to stderr. Exit codes: 0 clean, 1 findings at or above the
// failure threshold, 2 usage/IO/schema errors, 3 internal failure.

#include <cstdlib>
#include <iostream>
#include <unistd.h>

#include <CLI11.hpp>

#include "cellsentry/audit.hpp"

namespace cellsentry {

namespace detail {

inline bool color_enabled() {
    return std::getenv("CELLSENTRY_NO_COLOR") == nullptr && ::isatty(2);
}

inline std::string paint(const std::string& text, const char* code) {
    if (!color_enabled()) return text;
    return std::string("\033[") + code + "m" + text + "\033[0m";
}

inline std::string good(const std::string& t) { return paint(t, "32"); }
inline std::string bad(const std::string& t) { return paint(t, "31"); }

}  // namespace detail

inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"cellsentry - spreadsheet model audit toolkit"};
    app.require_subcommand(1);

    std::string model, config_path, out_dir, mode, threshold, sheet, suite_path, schema_path;
    std::string old_model, new_model, ledger_path, signoff_range, reviewer, phase = "lowlevel";
    std::string from_dir;
    double tol = 1e-9;
    bool force = false, clone = false, no_sens = false, edges = false, scope = false;
    bool verbose_sheets = false, init_ledger = false;

    auto* cmd_audit = app.add_subcommand("audit", "run the full audit pipeline");
    cmd_audit->add_option("model", model, "workbook interchange file")->required();
    cmd_audit->add_option("-c,--config", config_path, "engagement configuration");
    cmd_audit->add_option("-o,--out", out_dir, "output directory");
    cmd_audit->add_option("--tol", tol, "cached-value tolerance");
    cmd_audit->add_option("--threshold", threshold, "failing severity: info|warning|error");
    cmd_audit->add_flag("--force", force, "run high-level checks despite open error findings");
    cmd_audit->add_option("--mode", mode, "report wording: agreed|opinion");
    cmd_audit->add_flag("--no-sens", no_sens, "skip the sensitivity phase");

    auto* cmd_map = app.add_subcommand("map", "print single-character cell maps");
    cmd_map->add_option("model", model)->required();
    cmd_map->add_option("--sheet", sheet, "one sheet only");
    cmd_map->add_flag("--clone", clone, "clone map instead of type map");

    auto* cmd_graph = app.add_subcommand("graph", "dependency metrics and edge list");
    cmd_graph->add_option("model", model)->required();
    cmd_graph->add_flag("--edges", edges, "print the edge list instead of metrics");
    cmd_graph->add_option("-o,--out", out_dir, "write metrics.json and edges.txt here");

    auto* cmd_check = app.add_subcommand("check", "low-level rule findings as JSON lines");
    cmd_check->add_option("model", model)->required();
    cmd_check->add_option("-c,--config", config_path);
    cmd_check->add_option("--threshold", threshold);

    auto* cmd_recalc = app.add_subcommand("recalc", "recalculate and print the value map");
    cmd_recalc->add_option("model", model)->required();
    cmd_recalc->add_option("--tol", tol, "cached-value tolerance");

    auto* cmd_sens = app.add_subcommand("sens", "run a sensitivity scenario suite");
    cmd_sens->add_option("model", model)->required();
    cmd_sens->add_option("suite", suite_path, "scenario suite file")->required();
    cmd_sens->add_option("-o,--out", out_dir, "save scenario workbooks and results here");

    auto* cmd_hicheck = app.add_subcommand("hicheck", "high-level financial assertions");
    cmd_hicheck->add_option("model", model)->required();
    cmd_hicheck->add_option("schema", schema_path, "financial schema file")->required();
    cmd_hicheck->add_option("-c,--config", config_path);
    cmd_hicheck->add_flag("--force", force, "run despite open error-severity findings");

    auto* cmd_diff = app.add_subcommand("diff", "compare two model versions");
    cmd_diff->add_option("old", old_model)->required();
    cmd_diff->add_option("new", new_model)->required();
    cmd_diff->add_flag("--scope", scope, "append the re-review scope block");
    cmd_diff->add_flag("--verbose-sheets", verbose_sheets,
                       "per-cell detail for added/removed sheets");

    auto* cmd_cov = app.add_subcommand("coverage", "reviewer sign-off ledger and status");
    cmd_cov->add_option("model", model)->required();
    cmd_cov->add_option("ledger", ledger_path, "coverage ledger file")->required();
    cmd_cov->add_flag("--init", init_ledger, "create a ledger bound to this model");
    cmd_cov->add_option("--signoff", signoff_range, "range to sign off, e.g. Fin!A1:B10");
    cmd_cov->add_option("--reviewer", reviewer, "reviewer identifier");
    cmd_cov->add_option("--phase", phase, "check-phase tag");

    auto* cmd_report = app.add_subcommand("report", "re-render the report from audit artifacts");
    cmd_report->add_option("--from", from_dir, "audit output directory")->required();
    cmd_report->add_option("--mode", mode, "override wording: agreed|opinion");

    std::vector<const char*> argv;
    argv.push_back("cellsentry");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    auto threshold_severity = [&](Severity fallback) {
        if (threshold.empty()) return fallback;
        auto sev = parse_severity(threshold);
        if (!sev) throw ConfigError("unknown threshold '" + threshold + "'");
        return *sev;
    };

    try {
        if (cmd_audit->parsed()) {
            EngagementConfig cfg;
            if (!config_path.empty()) cfg = load_engagement_config(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (cmd_audit->count("--tol")) cfg.cached_tolerance = tol;
            cfg.fail_threshold = threshold_severity(cfg.fail_threshold);
            cfg.force_highlevel = force || cfg.force_highlevel;
            if (!mode.empty()) {
                auto m = parse_report_mode(mode);
                if (!m) throw ConfigError("unknown report mode '" + mode + "'");
                cfg.report_mode = *m;
            }
            AuditOutcome outcome = run_audit(model, cfg, true, !no_sens);
            size_t failing = outcome.findings_at_or_above(cfg.fail_threshold);
            std::cerr << "model      " << outcome.fingerprint.file_name << " ("
                      << outcome.fingerprint.byte_size << " bytes, sha256 "
                      << outcome.fingerprint.content_hash.substr(0, 12) << "...)\n"
                      << "formulas   " << outcome.metrics.formula_cells << " ("
                      << outcome.metrics.unique_formula_count << " unique)\n"
                      << "findings   " << outcome.findings.size() << " total, " << failing
                      << " at/above " << severity_text(cfg.fail_threshold) << "\n"
                      << "artifacts  " << cfg.out_dir.string() << "\n";
            if (outcome.highlevel_gated)
                std::cerr << detail::bad("high-level review gated by unresolved error findings "
                                         "(use --force to override)")
                          << "\n";
            std::cerr << (failing ? detail::bad("AUDIT: findings require attention")
                                  : detail::good("AUDIT: clean at the configured threshold"))
                      << "\n";
            return failing ? 1 : 0;
        }

        if (cmd_map->parsed()) {
            Workbook wb = load_workbook(model);
            MapMode mm = clone ? MapMode::Clone : MapMode::Type;
            for (size_t i = 0; i < wb.sheets.size(); ++i) {
                if (!sheet.empty() && !detail::iequals(wb.sheets[i].name, sheet)) continue;
                std::cout << cell_map_text(render_cell_map(wb, wb.sheets[i].name, mm),
                                           static_cast<int>(i + 1));
            }
            if (!sheet.empty() && !wb.find_sheet(sheet))
                throw NameError("unknown sheet '" + sheet + "'");
            return 0;
        }

        if (cmd_graph->parsed()) {
            Workbook wb = load_workbook(model);
            DepGraph g = build_graph(wb);
            Metrics m = compute_metrics(wb, g);
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                detail::write_json_file(std::filesystem::path(out_dir) / "metrics.json",
                                        metrics_to_json(m));
                detail::write_text_file(std::filesystem::path(out_dir) / "edges.txt",
                                        render_edge_list(g));
            }
            if (edges) std::cout << render_edge_list(g);
            else std::cout << metrics_to_json(m).dump(1) << "\n";
            return 0;
        }

        if (cmd_check->parsed()) {
            RuleConfig rules;
            Severity fail_at = Severity::Warning;
            if (!config_path.empty()) {
                EngagementConfig cfg = load_engagement_config(config_path);
                rules = cfg.rules;
                fail_at = cfg.fail_threshold;
            }
            fail_at = threshold_severity(fail_at);
            Workbook wb = load_workbook(model);
            DepGraph g = build_graph(wb);
            auto findings = run_lowlevel_checks(wb, g, rules);
            for (const auto& f : findings) std::cout << finding_to_json(f).dump() << "\n";
            size_t failing = 0;
            for (const auto& f : findings)
                if (static_cast<int>(f.severity) >= static_cast<int>(fail_at)) ++failing;
            return failing ? 1 : 0;
        }

        if (cmd_recalc->parsed()) {
            Workbook wb = load_workbook(model);
            RecalcResult r = recalculate(wb);
            json doc = values_to_json(r);
            json cached = json::array();
            for (const auto& f : verify_cached_values(wb, r, tol))
                cached.push_back(finding_to_json(f));
            doc["cached_findings"] = cached;
            std::cout << doc.dump(1) << "\n";
            return 0;
        }

        if (cmd_sens->parsed()) {
            Workbook wb = load_workbook(model);
            auto suite = load_scenario_suite(suite_path);
            std::optional<std::filesystem::path> dir;
            if (!out_dir.empty()) dir = out_dir;
            auto results = run_sensitivity_suite(wb, suite, dir);
            std::cout << scenario_results_to_json(results).dump(1) << "\n";
            for (const auto& r : results)
                if (!r.expectations_pass) return 1;
            return 0;
        }

        if (cmd_hicheck->parsed()) {
            RuleConfig rules;
            if (!config_path.empty()) rules = load_engagement_config(config_path).rules;
            Workbook wb = load_workbook(model);
            DepGraph g = build_graph(wb);
            auto low = run_lowlevel_checks(wb, g, rules);
            bool blocking = false;
            for (const auto& f : low)
                if (f.severity == Severity::Error) blocking = true;
            if (blocking && !force) {
                std::cerr << "refusing to run the high-level review: unresolved error-severity "
                             "low-level findings exist (use --force to override)\n";
                return 2;
            }
            FinancialSchema schema = load_schema(schema_path, wb);
            RecalcResult r = recalculate_with_graph(wb, g);
            auto results = run_financial_assertions(wb, r, schema);
            std::cout << assertion_results_to_json(results).dump(1) << "\n";
            for (const auto& a : results)
                if (a.ran && !a.pass) return 1;
            return 0;
        }

        if (cmd_diff->parsed()) {
            Workbook wa = load_workbook(old_model);
            Workbook wbk = load_workbook(new_model);
            auto entries = diff_workbooks(wa, wbk, verbose_sheets);
            for (const auto& e : entries) std::cout << diff_entry_to_json(e).dump() << "\n";
            if (scope) {
                DepGraph g = build_graph(wbk);
                std::cout << json{{"rereview_scope",
                                   rereview_scope_to_json(rereview_scope(entries, g))}}
                                 .dump()
                          << "\n";
            }
            std::cerr << entries.size() << " difference(s) between " << old_model << " and "
                      << new_model << "\n";
            return 0;
        }

        if (cmd_cov->parsed()) {
            Workbook wb = load_workbook(model);
            ModelFingerprint fp = fingerprint_model(model);
            CoverageLedger ledger;
            if (init_ledger) {
                ledger = make_coverage_ledger(fp);
                save_coverage_ledger(ledger, ledger_path);
            } else {
                ledger = load_coverage_ledger(ledger_path);
            }
            if (!signoff_range.empty()) {
                auto range = parse_range_text(signoff_range);
                if (!range) throw ConfigError("cannot parse range '" + signoff_range + "'");
                if (reviewer.empty()) throw ConfigError("--signoff requires --reviewer");
                record_signoff(ledger, wb, fp, *range, reviewer, phase, iso_utc_now());
                save_coverage_ledger(ledger, ledger_path);
            }
            if (ledger.fingerprint.content_hash != fp.content_hash)
                std::cerr << "warning: ledger is bound to a different model version\n";
            std::cout << coverage_to_json(coverage_status(ledger, wb)).dump(1) << "\n";
            return 0;
        }

        if (cmd_report->parsed()) {
            std::filesystem::path dir = from_dir;
            std::ifstream in(dir / "report.json");
            if (!in) throw IoError("cannot open " + (dir / "report.json").string());
            AuditReport report = report_from_json(json::parse(in));
            if (!mode.empty()) {
                auto m = parse_report_mode(mode);
                if (!m) throw ConfigError("unknown report mode '" + mode + "'");
                report.mode = *m;
                detail::write_json_file(dir / "report.json", report_to_json(report));
                detail::write_text_file(dir / "report.txt", report_to_text(report));
            }
            std::cout << report_to_text(report);
            return 0;
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NameError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const LedgerError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const EngineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

inline int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(std::move(args));
}

}  // namespace cellsentry
