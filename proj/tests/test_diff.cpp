#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cellsentry/diff.hpp"
#include "oracles.hpp"

using namespace cellsentry;

namespace {

Workbook from_json(const std::string& text) {
    return load_workbook_json(json::parse(text), "fixture");
}

/// Test-side replay oracle: content sets keyed by UPPER sheet / position.
struct ContentSet {
    std::map<std::string, std::map<std::string, std::string>> cells;  // SHEET -> addr -> text
    std::map<std::string, std::string> names;
    std::set<std::string> sheets;

    static ContentSet of(const Workbook& wb) {
        ContentSet cs;
        for (const auto& s : wb.sheets) {
            std::string key = detail::upper_copy(s.name);
            cs.sheets.insert(key);
            for (const auto& [pos, cell] : s.cells)
                cs.cells[key][col_to_name(pos.col) + std::to_string(pos.row)] =
                    detail::render_cell_content(cell);
        }
        for (const auto& n : wb.names) cs.names[detail::upper_copy(n.name)] = n.target_text;
        return cs;
    }

    friend bool operator==(const ContentSet&, const ContentSet&) = default;
};

}  // namespace

TEST_CASE("identical workbooks diff to nothing") {
    for (const char* path : {"samples/clean_model.json", "samples/seeded_model.json",
                             "samples/toy_model.json"}) {
        Workbook wb = load_workbook(path);
        CHECK(diff_workbooks(wb, wb).empty());
    }
}

TEST_CASE("a single formula edit yields one formula_changed entry") {
    Workbook a = from_json(R"x({"sheets":[{"name":"S","cells":{"B2":{"f":"=A1+1"}}}]})x");
    Workbook b = from_json(R"x({"sheets":[{"name":"S","cells":{"B2":{"f":"=A1+2"}}}]})x");
    auto d = diff_workbooks(a, b);
    REQUIRE(d.size() == 1);
    CHECK(d[0].kind == DiffKind::FormulaChanged);
    CHECK(d[0].location == "S!B2");
    CHECK(d[0].before == "=A1+1");
    CHECK(d[0].after == "=A1+2");

    // whitespace-only formula differences are not changes
    Workbook c = from_json(R"x({"sheets":[{"name":"S","cells":{"B2":{"f":"= A1 + 1"}}}]})x");
    CHECK(diff_workbooks(a, c).empty());
}

TEST_CASE("value, cached and kind changes are classified") {
    Workbook a = from_json(
        R"x({"sheets":[{"name":"S","cells":{"A1":{"v":5},"A2":{"f":"=1+1","v":2},"A3":{"v":"x"}}}]})x");
    Workbook b = from_json(
        R"x({"sheets":[{"name":"S","cells":{"A1":{"v":6},"A2":{"f":"=1+1","v":3},"A3":{"f":"=1"}}}]})x");
    auto d = diff_workbooks(a, b);
    REQUIRE(d.size() == 3);
    CHECK(d[0].kind == DiffKind::ValueChanged);    // A1 literal
    CHECK(d[1].kind == DiffKind::ValueChanged);    // A2 cached only
    CHECK(d[2].kind == DiffKind::FormulaChanged);  // A3 literal -> formula
}

TEST_CASE("whole sheets collapse to one entry unless verbose") {
    Workbook a = from_json(
        R"x({"sheets":[{"name":"Keep","cells":{"A1":{"v":1}}},{"name":"Scratch","cells":{"A1":{"v":1},"B2":{"v":2}}}]})x");
    Workbook b = from_json(R"x({"sheets":[{"name":"Keep","cells":{"A1":{"v":1}}}]})x");
    auto d = diff_workbooks(a, b);
    REQUIRE(d.size() == 1);
    CHECK(d[0].kind == DiffKind::SheetRemoved);
    CHECK(d[0].location == "sheet:Scratch");

    auto verbose = diff_workbooks(a, b, true);
    CHECK(verbose.size() == 3);  // sheet entry plus two removed cells
}

TEST_CASE("name retargeting and removal appear as name_changed") {
    Workbook a = from_json(
        R"x({"sheets":[{"name":"S"}],"names":[{"name":"Rev","ref":"S!A1:A2"},{"name":"Gone","ref":"S!B1:B2"}]})x");
    Workbook b = from_json(
        R"x({"sheets":[{"name":"S"}],"names":[{"name":"Rev","ref":"S!A1:A3"}]})x");
    auto d = diff_workbooks(a, b);
    REQUIRE(d.size() == 2);
    CHECK(d[0].kind == DiffKind::NameChanged);
    CHECK(d[0].location == "name:Gone");
    CHECK(d[0].after == "(absent)");
    CHECK(d[1].location == "name:Rev");
}

TEST_CASE("diff is anti-symmetric") {
    Workbook a = load_workbook("samples/clean_model.json");
    Workbook b = load_workbook("samples/seeded_model.json");
    auto fwd = diff_workbooks(a, b, true);
    auto rev = diff_workbooks(b, a, true);
    REQUIRE(fwd.size() == rev.size());
    auto mirror = [](DiffEntry e) {
        switch (e.kind) {
            case DiffKind::Added: e.kind = DiffKind::Removed; break;
            case DiffKind::Removed: e.kind = DiffKind::Added; break;
            case DiffKind::SheetAdded: e.kind = DiffKind::SheetRemoved; break;
            case DiffKind::SheetRemoved: e.kind = DiffKind::SheetAdded; break;
            default: break;
        }
        std::swap(e.before, e.after);
        return e;
    };
    auto key = [](const DiffEntry& e) {
        return std::tuple<int, std::string, std::string, std::string>(
            static_cast<int>(e.kind), e.location, e.before, e.after);
    };
    std::vector<std::tuple<int, std::string, std::string, std::string>> ka, kb;
    for (const auto& e : fwd) ka.push_back(key(e));
    for (const auto& e : rev) kb.push_back(key(mirror(e)));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    CHECK(ka == kb);
}

TEST_CASE("verbose diff entries replay the old content set into the new one") {
    Workbook a = load_workbook("samples/clean_model.json");
    Workbook b = load_workbook("samples/seeded_model.json");
    ContentSet state = ContentSet::of(a);
    ContentSet target = ContentSet::of(b);
    for (const auto& e : diff_workbooks(a, b, true)) {
        if (e.kind == DiffKind::NameChanged) {
            std::string key = detail::upper_copy(e.location.substr(5));
            if (e.after == "(absent)") state.names.erase(key);
            else state.names[key] = e.after;
            continue;
        }
        if (e.kind == DiffKind::SheetAdded) {
            state.sheets.insert(detail::upper_copy(e.location.substr(6)));
            continue;
        }
        if (e.kind == DiffKind::SheetRemoved) {
            std::string key = detail::upper_copy(e.location.substr(6));
            state.sheets.erase(key);
            state.cells.erase(key);
            continue;
        }
        auto range = parse_range_text(e.location);
        REQUIRE(range.has_value());
        std::string sheet = detail::upper_copy(range->start.sheet);
        std::string addr = col_to_name(range->start.col) + std::to_string(range->start.row);
        if (e.kind == DiffKind::Removed) state.cells[sheet].erase(addr);
        else state.cells[sheet][addr] = e.after;
    }
    // drop empty sheet maps left behind by erasure
    for (auto it = state.cells.begin(); it != state.cells.end();)
        it = it->second.empty() ? state.cells.erase(it) : std::next(it);
    for (auto it = target.cells.begin(); it != target.cells.end();)
        it = it->second.empty() ? target.cells.erase(it) : std::next(it);
    CHECK(state == target);
}

TEST_CASE("re-review scope is the transitive dependents of the change") {
    Workbook chain = from_json(
        R"x({"sheets":[{"name":"S","cells":{"A1":{"v":1},"A2":{"f":"=A1"},"A3":{"f":"=A2"}}}]})x");
    DepGraph g = build_graph(chain);

    std::vector<DiffEntry> leaf{{DiffKind::ValueChanged, "S!A3", "1", "2"}};
    ReReviewScope scope = rereview_scope(leaf, g);
    CHECK(scope.impacted.empty());
    CHECK(scope.total_cell_count == 3);

    std::vector<DiffEntry> root{{DiffKind::ValueChanged, "S!A1", "1", "2"}};
    ReReviewScope scope2 = rereview_scope(root, g);
    REQUIRE(scope2.impacted.size() == 2);
    CHECK(render_a1(scope2.impacted[0]) == "S!A2");
    CHECK(render_a1(scope2.impacted[1]) == "S!A3");
}

TEST_CASE("name changes impact every cell referencing the name") {
    Workbook wb = from_json(R"x({
      "sheets":[{"name":"S","cells":{"A1":{"v":1},"B1":{"f":"=Rev*2"},"C1":{"f":"=B1"}}}],
      "names":[{"name":"Rev","ref":"S!A1:A1"}]})x");
    DepGraph g = build_graph(wb);
    std::vector<DiffEntry> d{{DiffKind::NameChanged, "name:Rev", "S!A1:A1", "S!A2:A2"}};
    ReReviewScope scope = rereview_scope(d, g);
    REQUIRE(scope.changed.size() == 1);
    CHECK(render_a1(scope.changed[0]) == "S!B1");
    REQUIRE(scope.impacted.size() == 1);
    CHECK(render_a1(scope.impacted[0]) == "S!C1");
}

TEST_CASE("property: impact equals brute-force reachability; scope is monotone") {
    std::mt19937 rng(4040);
    Workbook toy = load_workbook("samples/toy_model.json");
    DepGraph g = build_graph(toy);

    std::vector<int> literal_nodes;
    for (size_t i = 0; i < g.nodes.size(); ++i)
        if (!g.nodes[i].value_source) literal_nodes.push_back(static_cast<int>(i));

    for (int trial = 0; trial < 25; ++trial) {
        int pick = literal_nodes[std::uniform_int_distribution<size_t>(
            0, literal_nodes.size() - 1)(rng)];
        CellRef target = g.ref_of(pick);
        std::vector<DiffEntry> d{{DiffKind::ValueChanged, render_a1(target), "x", "y"}};
        ReReviewScope scope = rereview_scope(d, g);
        auto want = oracle::reachable_from(g.out_edges, {pick});
        std::set<std::string> got;
        for (const auto& r : scope.impacted) got.insert(render_a1(r));
        std::set<std::string> expect;
        for (int n : want) expect.insert(render_a1(g.ref_of(n)));
        CHECK(got == expect);

        // monotonicity: adding a changed cell never shrinks the impact
        int extra = literal_nodes[std::uniform_int_distribution<size_t>(
            0, literal_nodes.size() - 1)(rng)];
        d.push_back({DiffKind::ValueChanged, render_a1(g.ref_of(extra)), "x", "y"});
        ReReviewScope wider = rereview_scope(d, g);
        std::set<std::string> got2;
        for (const auto& r : wider.impacted) got2.insert(render_a1(r));
        CHECK(std::includes(got2.begin(), got2.end(), got.begin(), got.end()));
    }
}
