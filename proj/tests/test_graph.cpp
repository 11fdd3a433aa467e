#include <catch2/catch_amalgamated.hpp>

#include "cellsentry/graph.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace cellsentry;

namespace {

Workbook grid(const std::map<std::string, std::string>& cells, const std::string& sheet = "S") {
    Sheet s;
    s.name = sheet;
    for (const auto& [addr, content] : cells) {
        auto ref = parse_a1_local(addr);
        REQUIRE(ref.has_value());
        Cell c;
        if (!content.empty() && content[0] == '=') c = Cell::formula(content);
        else if (content == "TRUE" || content == "FALSE") c = Cell::boolean_cell(content == "TRUE");
        else if (!content.empty() && (std::isdigit((unsigned char)content[0]) || content[0] == '-'))
            c = Cell::num(std::strtod(content.c_str(), nullptr));
        else c = Cell::label(content);
        s.cells[{ref->row, ref->col}] = c;
    }
    Workbook wb;
    wb.sheets.push_back(std::move(s));
    return wb;
}

}  // namespace

TEST_CASE("graph edges reflect reference extraction exactly") {
    Workbook wb = grid({{"A1", "1"}, {"A2", "=A1"}});
    DepGraph g = build_graph(wb);
    CHECK(g.edge_count == 1);
    auto deps = query_links(g, CellRef{"S", 1, 1}, LinkDirection::Dependents, false);
    REQUIRE(deps.size() == 1);
    CHECK(render_a1(deps[0]) == "S!A2");

    Workbook wb2 = grid({{"B1", "=SUM(A1:A3)"}});
    DepGraph g2 = build_graph(wb2);
    CHECK(g2.edge_count == 3);  // range expanded to members, blanks included
    auto pre = query_links(g2, CellRef{"S", 2, 1}, LinkDirection::Precedents, false);
    CHECK(pre.size() == 3);

    Workbook empty;
    DepGraph g3 = build_graph(empty);
    CHECK(g3.nodes.empty());
    CHECK(g3.edge_count == 0);
}

TEST_CASE("duplicated references create one edge per occurrence") {
    Workbook wb = grid({{"A1", "1"}, {"B1", "=A1+A1"}});
    DepGraph g = build_graph(wb);
    CHECK(g.edge_count == 2);
}

TEST_CASE("transitive links exclude the start unless it lies on a cycle") {
    Workbook chain = grid({{"A1", "1"}, {"A2", "=A1"}, {"A3", "=A2"}});
    DepGraph g = build_graph(chain);
    auto deps = query_links(g, CellRef{"S", 1, 1}, LinkDirection::Dependents, true);
    REQUIRE(deps.size() == 2);
    CHECK(render_a1(deps[0]) == "S!A2");
    CHECK(render_a1(deps[1]) == "S!A3");
    CHECK(query_links(g, CellRef{"S", 1, 1}, LinkDirection::Precedents, false).empty());
    CHECK(query_links(g, CellRef{"S", 9, 9}, LinkDirection::Dependents, true).empty());

    Workbook loop = grid({{"A1", "=A2"}, {"A2", "=A1"}});
    DepGraph gl = build_graph(loop);
    auto self = query_links(gl, CellRef{"S", 1, 1}, LinkDirection::Dependents, true);
    REQUIRE(self.size() == 2);  // contains itself: it lies on a cycle
}

TEST_CASE("property: transitive closure equals brute-force reachability") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 50;
        // forward-only edges make a DAG
        std::vector<std::vector<int>> adj(n);
        std::bernoulli_distribution edge(0.08);
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (edge(rng)) adj[u].push_back(v);
        Workbook wb = gen::digraph_workbook(adj);
        DepGraph g = build_graph(wb);
        int start = std::uniform_int_distribution<int>(0, n - 1)(rng);
        auto got = query_links(g, CellRef{"G", 1, start + 1}, LinkDirection::Dependents, true);
        auto want = oracle::reachable_from(adj, {start});
        std::set<int> got_rows;
        for (const auto& r : got) got_rows.insert(r.row - 1);
        CHECK(got_rows == want);
    }
}

TEST_CASE("circularity reports SCCs and self-loops") {
    Workbook two = grid({{"A1", "=B1"}, {"B1", "=A1"}});
    auto cycles = find_circularity(build_graph(two));
    REQUIRE(cycles.size() == 1);
    REQUIRE(cycles[0].size() == 2);
    CHECK(render_a1(cycles[0][0]) == "S!A1");
    CHECK(render_a1(cycles[0][1]) == "S!B1");

    Workbook self = grid({{"A1", "=A1"}});
    auto loops = find_circularity(build_graph(self));
    REQUIRE(loops.size() == 1);
    CHECK(loops[0].size() == 1);

    Workbook acyc = grid({{"A1", "1"}, {"A2", "=A1"}});
    CHECK(find_circularity(build_graph(acyc)).empty());
}

TEST_CASE("property: cycle membership matches a brute-force DFS oracle") {
    std::mt19937 rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        int n = std::uniform_int_distribution<int>(5, 120)(rng);
        double density = std::uniform_real_distribution<double>(0.002, 0.08)(rng);
        auto adj = gen::random_digraph(rng, n, density);
        DepGraph g = build_graph(gen::digraph_workbook(adj));
        std::set<int> got;
        auto cycles = find_circularity(g);
        for (const auto& cyc : cycles)
            for (const auto& ref : cyc) got.insert(ref.row - 1);
        CHECK(got == oracle::cycle_members(adj));
        // reported cycle sets are disjoint
        size_t total = 0;
        for (const auto& cyc : cycles) total += cyc.size();
        CHECK(total == got.size());
    }
}

TEST_CASE("metrics recognize copies through normalization") {
    std::map<std::string, std::string> cells{{"A1", "1"}};
    for (int r = 1; r <= 10; ++r)
        cells["B" + std::to_string(r)] = "=A" + std::to_string(r) + "*$A$1";
    Workbook wb = grid(cells);
    DepGraph g = build_graph(wb);
    Metrics m = compute_metrics(wb, g);
    CHECK(m.total_cells == 11);
    CHECK(m.formula_cells == 10);
    CHECK(m.unique_formula_count == 1);
    CHECK(m.repeated_cells == 9);
    CHECK(m.repeated_per_original == 9.0);  // rendered as "1:9"
    CHECK(metrics_to_json(m)["original_to_repeated_ratio"] == "1:9");
}

TEST_CASE("metrics on an all-literal sheet") {
    Workbook wb = grid({{"A1", "x"}, {"B2", "5"}, {"C3", "TRUE"}});
    Metrics m = compute_metrics(wb, build_graph(wb));
    CHECK(m.formula_cells == 0);
    CHECK(m.unique_formula_count == 0);
    CHECK(m.formula_length_histogram.empty());
    CHECK(m.estimated_review_hours == 0.0);
}

TEST_CASE("review effort scales linearly with unique formulas") {
    // 10,000 unique formulas at the default 40/hour come to 250 hours; the
    // unit-scale check uses the same division.
    std::map<std::string, std::string> cells;
    for (int r = 1; r <= 8; ++r)
        cells["C" + std::to_string(r)] = "=$A$" + std::to_string(r) + "+$B$" + std::to_string(r);
    Workbook wb = grid(cells);
    Metrics m = compute_metrics(wb, build_graph(wb));
    CHECK(m.unique_formula_count == 8);
    CHECK(m.estimated_review_hours == Catch::Approx(8.0 / 40.0));
    Metrics faster = compute_metrics(wb, build_graph(wb), 80.0);
    CHECK(faster.estimated_review_hours == Catch::Approx(0.1));
    CHECK(10000.0 / kDefaultFormulasPerHour == 250.0);
}

TEST_CASE("degree sums equal the edge count") {
    std::mt19937 rng(99);
    auto adj = gen::random_digraph(rng, 60, 0.05);
    DepGraph g = build_graph(gen::digraph_workbook(adj));
    size_t in = 0, out = 0;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        in += g.in_edges[i].size();
        out += g.out_edges[i].size();
    }
    CHECK(in == g.edge_count);
    CHECK(out == g.edge_count);
}

TEST_CASE("metrics are invariant under sheet reordering") {
    Workbook wb = load_workbook("samples/clean_model.json");
    Metrics before = compute_metrics(wb, build_graph(wb));
    std::swap(wb.sheets[0], wb.sheets[1]);
    Metrics after = compute_metrics(wb, build_graph(wb));
    CHECK(before.total_cells == after.total_cells);
    CHECK(before.unique_formula_count == after.unique_formula_count);
    CHECK(before.repeated_cells == after.repeated_cells);
    CHECK(before.cross_sheet_edge_count == after.cross_sheet_edge_count);
    CHECK(before.locality_histogram == after.locality_histogram);
    CHECK(before.formula_length_histogram == after.formula_length_histogram);
}

TEST_CASE("cross-sheet edges are counted, local edges bucketed by distance") {
    json doc = json::parse(R"x({
      "sheets":[{"name":"A","cells":{"A1":{"v":1},"B1":{"f":"=A1"},"Z1":{"f":"=A1"}}},
                {"name":"B","cells":{"A1":{"f":"=A!A1"}}}]})x");
    Workbook wb = load_workbook_json(doc, "t");
    Metrics m = compute_metrics(wb, build_graph(wb));
    CHECK(m.cross_sheet_edge_count == 1);
    CHECK(m.locality_histogram.at("1") == 1);      // A1 -> B1
    CHECK(m.locality_histogram.at("11-100") == 1);  // A1 -> Z1 (distance 25)
}

TEST_CASE("oversized ranges become flagged summary edges") {
    Workbook wb = grid({{"A1", "=SUM(B1:ated)"}});  // placeholder replaced below
    wb.sheets[0].cells.clear();
    wb.sheets[0].cells[{1, 1}] = Cell::formula("=SUM(B1:XFD1000)");  // 16383 * 1000 cells
    DepGraph g = build_graph(wb);
    REQUIRE(g.capped_ranges.size() == 1);
    CHECK(g.edge_count == 1);  // one summary edge
}

TEST_CASE("edge list renders the documented line format") {
    Workbook wb = grid({{"A1", "1"}, {"A2", "=A1"}});
    std::string edges = render_edge_list(build_graph(wb));
    CHECK(edges == "S!A1 -> S!A2\n");
}

TEST_CASE("breaking one edge of each simple cycle leaves the graph acyclic") {
    // disjoint simple cycles plus forward chatter between them
    std::mt19937 rng(505);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 40;
        std::vector<std::vector<int>> adj(n);
        int at = 0;
        std::vector<std::pair<int, int>> cycle_edges;
        while (at + 3 <= n) {
            int len = std::uniform_int_distribution<int>(2, 5)(rng);
            if (at + len > n) break;
            for (int i = 0; i < len; ++i) {
                int u = at + i, v = at + (i + 1) % len;
                adj[u].push_back(v);
                cycle_edges.emplace_back(u, v);
            }
            at += len + std::uniform_int_distribution<int>(0, 2)(rng);
        }
        DepGraph g = build_graph(gen::digraph_workbook(adj));
        auto cycles = find_circularity(g);
        REQUIRE_FALSE(cycles.empty());

        // remove the first reported edge of each cycle set
        std::vector<std::vector<int>> cut = adj;
        for (const auto& cyc : cycles) {
            int first = cyc.front().row - 1;
            REQUIRE_FALSE(cut[first].empty());
            // drop one outgoing edge that stays inside the cycle set
            std::set<int> members;
            for (const auto& ref : cyc) members.insert(ref.row - 1);
            auto& out = cut[first];
            for (auto it = out.begin(); it != out.end(); ++it)
                if (members.count(*it)) {
                    out.erase(it);
                    break;
                }
        }
        DepGraph g2 = build_graph(gen::digraph_workbook(cut));
        CHECK(find_circularity(g2).empty());
    }
}
