#include <catch2/catch_amalgamated.hpp>

#include "cellsentry/papertrail.hpp"

using namespace cellsentry;
namespace fs = std::filesystem;

namespace {

Workbook from_json(const std::string& text) {
    return load_workbook_json(json::parse(text), "fixture");
}

ModelFingerprint fp(const std::string& hash) {
    ModelFingerprint f;
    f.file_name = "model.json";
    f.byte_size = 42;
    f.modified_timestamp = "2026-08-01T10:00:00Z";
    f.content_hash = hash;
    return f;
}

const std::string kHashA(64, 'a');
const std::string kHashB(64, 'b');

}  // namespace

TEST_CASE("type maps code every cell with one character") {
    Workbook wb = from_json(R"x({
      "sheets":[{"name":"S","cells":{
        "A1":{"v":"hdr"},"B1":{"f":"=A1"},"C2":{"v":5},
        "A2":{"v":true},"B2":{"e":"#N/A"}}}]})x");
    CellMap map = render_cell_map(wb, "S", MapMode::Type);
    REQUIRE(map.rows.size() == 2);
    CHECK(map.rows[0] == "LF.");
    CHECK(map.rows[1] == "BEN");
    CHECK_THROWS_AS(render_cell_map(wb, "Nope", MapMode::Type), NameError);
}

TEST_CASE("clone maps mark copies by direction") {
    Workbook wb = from_json(R"x({
      "sheets":[{"name":"S","cells":{
        "B1":{"f":"=A1*2"},"B2":{"f":"=A2*2"},"B3":{"f":"=A3*2"},
        "C1":{"f":"=B1*2"},
        "E5":{"f":"=D5*2"}}}]})x");
    CellMap map = render_cell_map(wb, "S", MapMode::Clone);
    CHECK(map.at(2, 1) == 'F');   // first occurrence
    CHECK(map.at(2, 2) == '^');   // copy of the cell above
    CHECK(map.at(2, 3) == '^');
    CHECK(map.at(3, 1) == '<');   // copy of the cell to the left
    CHECK(map.at(5, 5) == 'c');   // copy of a non-adjacent original
}

TEST_CASE("empty sheets map to zero-by-zero") {
    Workbook wb = from_json(R"x({"sheets":[{"name":"Empty"}]})x");
    CellMap map = render_cell_map(wb, "Empty", MapMode::Type);
    CHECK(map.width == 0);
    CHECK(map.height == 0);
    CHECK(cell_map_text(map, 3).find("(empty)") != std::string::npos);
}

TEST_CASE("map text carries rulers for print sign-off") {
    Workbook wb = from_json(R"x({"sheets":[{"name":"S","cells":{"A1":{"v":1},"L20":{"v":2}}}]})x");
    std::string text = cell_map_text(render_cell_map(wb, "S", MapMode::Type), 2);
    CHECK(text.find("Sheet 2: S") != std::string::npos);
    CHECK(text.find("(A1:L20)") != std::string::npos);
    CHECK(text.find("ABCDEFGHIJKL") != std::string::npos);
    CHECK(text.find("20  ") != std::string::npos);
}

TEST_CASE("sign-offs append one entry per member cell") {
    Workbook wb = from_json(R"x({"sheets":[{"name":"S","cells":{"A1":{"v":1}}}]})x");
    CoverageLedger ledger = make_coverage_ledger(fp(kHashA));
    record_signoff(ledger, wb, fp(kHashA), *parse_range_text("S!A1:A10"), "gc", "lowlevel",
                   "2026-08-02T09:00:00Z");
    CHECK(ledger.entries.size() == 10);
    record_signoff(ledger, wb, fp(kHashA), *parse_range_text("S!A1:A1"), "rb", "lowlevel",
                   "2026-08-02T09:05:00Z");
    CHECK(ledger.entries.size() == 11);  // second reviewer on the same cell is legitimate

    CHECK_THROWS_AS(record_signoff(ledger, wb, fp(kHashA), *parse_range_text("Gone!A1:A2"),
                                   "gc", "lowlevel", "t"),
                    LedgerError);
    CHECK(ledger.entries.size() == 11);  // failed sign-off leaves the ledger untouched

    // a modified model invalidates the binding
    CHECK_THROWS_AS(record_signoff(ledger, wb, fp(kHashB), *parse_range_text("S!A1:A1"), "gc",
                                   "lowlevel", "t"),
                    LedgerError);
}

TEST_CASE("coverage is per sheet over non-blank cells") {
    Workbook wb = from_json(R"x({
      "sheets":[{"name":"S","cells":{
        "A1":{"v":1},"A2":{"v":2},"A3":{"v":3},"A4":{"v":4},"A5":{"v":5},
        "A6":{"v":6},"A7":{"v":7},"A8":{"v":8},"A9":{"v":9},"A10":{"v":10}}},
       {"name":"Blank"}]})x");
    CoverageLedger ledger = make_coverage_ledger(fp(kHashA));
    record_signoff(ledger, wb, fp(kHashA), *parse_range_text("S!A1:A9"), "gc", "lowlevel", "t");
    auto cov = coverage_status(ledger, wb);
    REQUIRE(cov.size() == 2);
    CHECK(cov[0].signed_cells == 9);
    CHECK(cov[0].total_cells == 10);
    CHECK(cov[0].percent == Catch::Approx(90.0));
    REQUIRE(cov[0].unsigned_cells == std::vector<std::string>{"A10"});
    CHECK(cov[1].percent == 100.0);
    CHECK(cov[1].zero_denominator);

    record_signoff(ledger, wb, fp(kHashA), *parse_range_text("S!A10:A10"), "gc", "lowlevel", "t");
    auto cov2 = coverage_status(ledger, wb);
    CHECK(cov2[0].percent == 100.0);
    CHECK(cov2[0].unsigned_cells.empty());
    CHECK(cov2[0].percent >= cov[0].percent);  // monotone under sign-offs
}

TEST_CASE("ledger files are append-only with byte-stable history") {
    Workbook wb = from_json(R"x({"sheets":[{"name":"S","cells":{"A1":{"v":1}}}]})x");
    fs::path path = fs::temp_directory_path() / "cs_ledger.jsonl";
    CoverageLedger ledger = make_coverage_ledger(fp(kHashA));
    record_signoff(ledger, wb, fp(kHashA), *parse_range_text("S!A1:A3"), "gc", "low", "t1");
    save_coverage_ledger(ledger, path);
    std::ifstream in1(path, std::ios::binary);
    std::string bytes1((std::istreambuf_iterator<char>(in1)), std::istreambuf_iterator<char>());

    record_signoff(ledger, wb, fp(kHashA), *parse_range_text("S!B1:B2"), "rb", "high", "t2");
    save_coverage_ledger(ledger, path);
    std::ifstream in2(path, std::ios::binary);
    std::string bytes2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
    CHECK(bytes2.size() > bytes1.size());
    CHECK(bytes2.substr(0, bytes1.size()) == bytes1);  // history is a stable prefix

    CoverageLedger back = load_coverage_ledger(path);
    CHECK(back.fingerprint == ledger.fingerprint);
    CHECK(back.entries == ledger.entries);
}

TEST_CASE("finding lifecycle permits only the documented transitions") {
    Finding f;
    f.id = 1;
    f.rule_code = "R022";
    f.locations = {"S!B2"};
    f.message = "embedded constant 1.175";
    FindingsStore store = FindingsStore::from_findings({f});

    CHECK_THROWS_AS(store.manage_finding(1, FindingStatus::Verified, "", 2, "t"), LedgerError);
    CHECK_THROWS_AS(store.manage_finding(99, FindingStatus::Corrected, "", 2, "t"), LedgerError);

    store.manage_finding(1, FindingStatus::Corrected, "developer fixed in v2", 2, "t");
    CHECK(store.current().at(1).status == FindingStatus::Corrected);
    CHECK(store.current().at(1).iteration == 2);
    CHECK_THROWS_AS(store.manage_finding(1, FindingStatus::Waived, "", 3, "t"), LedgerError);
    store.manage_finding(1, FindingStatus::Verified, "re-reviewed", 3, "t");
    CHECK(store.current().at(1).status == FindingStatus::Verified);

    Finding g;
    g.id = 2;
    g.rule_code = "R030";
    g.locations = {"S!J12"};
    g.message = "outlier";
    FindingsStore store2 = FindingsStore::from_findings({g});
    store2.manage_finding(2, FindingStatus::Waived, "accepted by client", 2, "t");
    CHECK(store2.current().at(2).status == FindingStatus::Waived);

    fs::path path = fs::temp_directory_path() / "cs_findings.jsonl";
    store.save(path);
    FindingsStore loaded = FindingsStore::load(path);
    CHECK(loaded.current().at(1).status == FindingStatus::Verified);
    CHECK(loaded.log().size() == store.log().size());  // full history preserved
}

TEST_CASE("reports carry identification, unresolved issues and liability") {
    Finding open;
    open.id = 1;
    open.rule_code = "R021";
    open.severity = Severity::Warning;
    open.locations = {"S!B4"};
    open.message = "dangling reference";
    Finding waived = open;
    waived.id = 2;
    waived.rule_code = "R022";
    waived.status = FindingStatus::Waived;
    waived.message = "embedded constant accepted";

    AuditReport r = emit_report(fp(kHashA), {"procedure one"}, std::nullopt, {open, waived}, {},
                                {}, {}, "Liability capped at GBP 1m.",
                                ReportMode::AgreedProcedures, "2026-08-03T12:00:00Z");
    std::string text = report_to_text(r);
    CHECK(text.find("model.json") != std::string::npos);
    CHECK(text.find("42 bytes") != std::string::npos);
    CHECK(text.find("2026-08-01T10:00:00Z") != std::string::npos);
    CHECK(text.find(kHashA) != std::string::npos);
    CHECK(text.find("Unresolved issues:") != std::string::npos);
    CHECK(text.find("[waived] R022") != std::string::npos);
    CHECK(text.find("Liability capped at GBP 1m.") != std::string::npos);
    CHECK(text.find("agreed-upon procedures") != std::string::npos);

    AuditReport opinion = r;
    opinion.mode = ReportMode::MaterialErrorOpinion;
    CHECK(report_to_text(opinion).find("material error") != std::string::npos);

    // resolve everything: the unresolved section disappears
    AuditReport clean = r;
    clean.findings[0].status = FindingStatus::Verified;
    clean.findings[1].status = FindingStatus::Verified;
    CHECK(report_to_text(clean).find("Unresolved issues:") == std::string::npos);

    CHECK_THROWS_AS(emit_report(ModelFingerprint{}, {}, std::nullopt, {}, {}, {}, {}, "x",
                                ReportMode::AgreedProcedures, "t"),
                    LedgerError);
}

TEST_CASE("reports are byte-identical apart from the generation timestamp") {
    AuditReport a = emit_report(fp(kHashA), {"p"}, std::nullopt, {}, {}, {}, {}, "L",
                                ReportMode::AgreedProcedures, "2026-08-03T12:00:00Z");
    AuditReport b = emit_report(fp(kHashA), {"p"}, std::nullopt, {}, {}, {}, {}, "L",
                                ReportMode::AgreedProcedures, "2026-08-03T12:00:00Z");
    CHECK(report_to_text(a) == report_to_text(b));
    CHECK(report_to_json(a).dump() == report_to_json(b).dump());

    AuditReport later = emit_report(fp(kHashA), {"p"}, std::nullopt, {}, {}, {}, {}, "L",
                                    ReportMode::AgreedProcedures, "2026-08-03T12:00:05Z");
    std::string ta = report_to_text(a), tl = report_to_text(later);
    REQUIRE(ta != tl);
    // the only differing line is the generation stamp
    std::istringstream sa(ta), sl(tl);
    std::string la, ll;
    int diff_lines = 0;
    while (std::getline(sa, la) && std::getline(sl, ll))
        if (la != ll) {
            ++diff_lines;
            CHECK(la.rfind("Generated at:", 0) == 0);
        }
    CHECK(diff_lines == 1);
}

TEST_CASE("the machine report recovers every figure in the text report") {
    Workbook wb = load_workbook("samples/clean_model.json");
    DepGraph g = build_graph(wb);
    Metrics m = compute_metrics(wb, g);
    Finding f;
    f.id = 1;
    f.rule_code = "R040";
    f.locations = {"Fin!C7"};
    f.message = "example";
    AssertionResult a;
    a.code = "H001";
    a.title = "balance sheet balances";
    a.ran = true;
    a.pass = true;
    SheetCoverage cov;
    cov.sheet = "Fin";
    cov.signed_cells = 3;
    cov.total_cells = 10;
    cov.percent = 30.0;
    AuditReport r = emit_report(fp(kHashA), {"p1", "p2"}, m, {f}, {a},
                                {{"base", 4, 0, true}}, {cov}, "Liability text",
                                ReportMode::MaterialErrorOpinion, "2026-08-03T12:00:00Z");
    AuditReport back = report_from_json(report_to_json(r));
    CHECK(report_to_text(back) == report_to_text(r));
    CHECK(report_to_json(back).dump() == report_to_json(r).dump());
}
