#pragma once

// Precedent/dependent graph over cell coordinates, circularity detection,
// and the model-characteristic metrics used to size a review.

#include <algorithm>
#include <cstdint>
#include <queue>
#include <set>
#include <unordered_map>
#include <vector>

#include "cellsentry/formula.hpp"

namespace cellsentry {

/// Ranges expanding to more than this many member cells are kept as summary
/// entries instead of per-cell edges.
inline constexpr long long kRangeExpansionCap = 1'000'000;

struct DepGraph {
    struct Node {
        int sheet = 0;  // index into sheet_names
        int col = 1;
        int row = 1;
        bool is_formula = false;
        bool defective = false;   // formula cell whose source failed to parse
        bool value_source = false;  // blank cell that exists only because it is referenced
    };

    std::vector<std::string> sheet_names;
    std::vector<Node> nodes;
    std::vector<std::vector<int>> out_edges;  // precedent -> dependents
    std::vector<std::vector<int>> in_edges;   // dependent -> precedents
    std::vector<std::optional<FormulaAst>> asts;           // per node, formula nodes only
    std::vector<std::optional<NormalizedFormula>> normals;  // per node, parseable formulas
    std::vector<std::vector<RefUse>> dangling;  // unresolvable refs per node
    std::map<std::string, std::vector<int>> name_users;  // UPPER name -> nodes using it
    std::vector<std::pair<int, RangeRef>> capped_ranges;
    size_t edge_count = 0;

    std::unordered_map<uint64_t, int> index;

    static uint64_t key(int sheet, int col, int row) {
        return (static_cast<uint64_t>(sheet) << 36) | (static_cast<uint64_t>(col) << 21) |
               static_cast<uint64_t>(row);
    }

    int find_node(int sheet, int col, int row) const {
        auto it = index.find(key(sheet, col, row));
        return it == index.end() ? -1 : it->second;
    }

    int find_node(const CellRef& ref) const {
        for (size_t i = 0; i < sheet_names.size(); ++i)
            if (detail::iequals(sheet_names[i], ref.sheet))
                return find_node(static_cast<int>(i), ref.col, ref.row);
        return -1;
    }

    CellRef ref_of(int node) const {
        const Node& n = nodes[node];
        return CellRef{sheet_names[n.sheet], n.col, n.row, false, false};
    }
};

namespace detail {

inline int ensure_node(DepGraph& g, int sheet, int col, int row, bool as_value_source) {
    uint64_t k = DepGraph::key(sheet, col, row);
    auto it = g.index.find(k);
    if (it != g.index.end()) return it->second;
    int id = static_cast<int>(g.nodes.size());
    DepGraph::Node n;
    n.sheet = sheet;
    n.col = col;
    n.row = row;
    n.value_source = as_value_source;
    g.nodes.push_back(n);
    g.out_edges.emplace_back();
    g.in_edges.emplace_back();
    g.asts.emplace_back();
    g.normals.emplace_back();
    g.dangling.emplace_back();
    g.index.emplace(k, id);
    return id;
}

inline void add_edge(DepGraph& g, int precedent, int dependent) {
    g.out_edges[precedent].push_back(dependent);
    g.in_edges[dependent].push_back(precedent);
    ++g.edge_count;
}

}  // namespace detail

/// Builds the dependency graph: one node per non-blank cell plus value-source
/// nodes for referenced blanks; one edge per expanded reference occurrence.
inline DepGraph build_graph(const Workbook& wb) {
    DepGraph g;
    for (const auto& s : wb.sheets) g.sheet_names.push_back(s.name);

    for (size_t si = 0; si < wb.sheets.size(); ++si)
        for (const auto& [pos, cell] : wb.sheets[si].cells) {
            int id = detail::ensure_node(g, static_cast<int>(si), pos.col, pos.row, false);
            g.nodes[id].is_formula = cell.is_formula();
        }

    for (size_t si = 0; si < wb.sheets.size(); ++si) {
        for (const auto& [pos, cell] : wb.sheets[si].cells) {
            if (!cell.is_formula()) continue;
            int id = g.find_node(static_cast<int>(si), pos.col, pos.row);
            CellRef origin{wb.sheets[si].name, pos.col, pos.row, false, false};
            FormulaAst ast;
            try {
                ast = parse_formula(cell.text);
            } catch (const ParseError&) {
                g.nodes[id].defective = true;
                continue;
            }
            g.normals[id] = normalize_r1c1(ast, origin);
            for (const RefUse& use : collect_refs(ast, origin, wb)) {
                if (use.kind == RefUse::Kind::DanglingSheet ||
                    use.kind == RefUse::Kind::DanglingName) {
                    g.dangling[id].push_back(use);
                    continue;
                }
                if (!use.via_name.empty()) g.name_users[use.via_name].push_back(id);
                int target_sheet = wb.sheet_index(use.target.start.sheet);
                const RangeRef& r = use.target;
                if (r.area() > kRangeExpansionCap) {
                    g.capped_ranges.emplace_back(id, r);
                    int anchor = detail::ensure_node(g, target_sheet, r.start.col, r.start.row,
                                                     wb.cell(r.start).is_blank());
                    detail::add_edge(g, anchor, id);
                    continue;
                }
                for (int row = r.start.row; row <= r.end.row; ++row)
                    for (int col = r.start.col; col <= r.end.col; ++col) {
                        CellRef member{r.start.sheet, col, row, false, false};
                        int m = detail::ensure_node(g, target_sheet, col, row,
                                                    wb.cell(member).is_blank());
                        detail::add_edge(g, m, id);
                    }
            }
            g.asts[id] = std::move(ast);
        }
    }
    return g;
}

enum class LinkDirection { Precedents, Dependents };

/// Direct neighbours or transitive closure; the queried cell appears in its
/// own closure only when it lies on a cycle.
inline std::vector<CellRef> query_links(const DepGraph& g, const CellRef& ref,
                                        LinkDirection dir, bool transitive) {
    std::vector<CellRef> out;
    int start = g.find_node(ref);
    if (start < 0) return out;
    const auto& adj = dir == LinkDirection::Dependents ? g.out_edges : g.in_edges;

    std::set<int> seen;
    if (!transitive) {
        for (int n : adj[start]) seen.insert(n);
    } else {
        std::vector<int> stack(adj[start].begin(), adj[start].end());
        while (!stack.empty()) {
            int n = stack.back();
            stack.pop_back();
            if (!seen.insert(n).second) continue;
            for (int m : adj[n]) stack.push_back(m);
        }
    }
    for (int n : seen) out.push_back(g.ref_of(n));
    std::sort(out.begin(), out.end(), PositionLess{});
    return out;
}

/// Every strongly connected component of size > 1 plus every self-loop,
/// each as a position-sorted cell list. Empty iff the graph is acyclic.
inline std::vector<std::vector<CellRef>> find_circularity(const DepGraph& g) {
    const int n = static_cast<int>(g.nodes.size());
    std::vector<int> idx(n, -1), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    std::vector<std::vector<int>> sccs;
    int counter = 0;

    struct Frame {
        int v;
        size_t child = 0;
    };
    for (int root = 0; root < n; ++root) {
        if (idx[root] != -1) continue;
        std::vector<Frame> frames{{root}};
        idx[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.child < g.out_edges[f.v].size()) {
                int w = g.out_edges[f.v][f.child++];
                if (idx[w] == -1) {
                    idx[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back(Frame{w});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], idx[w]);
                }
            } else {
                if (low[f.v] == idx[f.v]) {
                    std::vector<int> comp;
                    int w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp.push_back(w);
                    } while (w != f.v);
                    sccs.push_back(std::move(comp));
                }
                int v = f.v;
                frames.pop_back();
                if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
            }
        }
    }

    std::vector<std::vector<CellRef>> cycles;
    for (const auto& comp : sccs) {
        bool cyclic = comp.size() > 1;
        if (!cyclic) {
            int v = comp[0];
            for (int w : g.out_edges[v])
                if (w == v) { cyclic = true; break; }
        }
        if (!cyclic) continue;
        std::vector<CellRef> cells;
        for (int v : comp) cells.push_back(g.ref_of(v));
        std::sort(cells.begin(), cells.end(), PositionLess{});
        cycles.push_back(std::move(cells));
    }
    std::sort(cycles.begin(), cycles.end(), [](const auto& a, const auto& b) {
        return compare_position(a.front(), b.front()) < 0;
    });
    return cycles;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Default review throughput. The audit literature anchors only the total
/// effort range, so the constant is an explicit, configurable assumption.
inline constexpr double kDefaultFormulasPerHour = 40.0;

struct Metrics {
    size_t total_cells = 0;
    size_t formula_cells = 0;
    size_t unique_formula_count = 0;
    size_t repeated_cells = 0;
    double repeated_per_original = 0.0;  // rendered as "1:<value>"
    std::map<int, size_t> formula_length_histogram;  // bucket start (width 20) -> count
    size_t max_precedents = 0;
    double mean_precedents = 0.0;
    size_t max_dependents = 0;
    double mean_dependents = 0.0;
    size_t cross_sheet_edge_count = 0;
    std::map<std::string, size_t> locality_histogram;  // Chebyshev distance buckets
    double estimated_review_hours = 0.0;
};

namespace detail {

inline std::string locality_bucket(int dist) {
    if (dist == 0) return "0";
    if (dist == 1) return "1";
    if (dist <= 10) return "2-10";
    if (dist <= 100) return "11-100";
    if (dist <= 1000) return "101-1000";
    return ">1000";
}

}  // namespace detail

inline Metrics compute_metrics(const Workbook& wb, const DepGraph& g,
                               double formulas_per_hour = kDefaultFormulasPerHour) {
    Metrics m;
    m.total_cells = wb.non_blank_count();

    std::set<std::string> unique;
    size_t defective = 0;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        if (!g.nodes[i].is_formula) continue;
        ++m.formula_cells;
        if (g.normals[i]) {
            unique.insert(g.normals[i]->text);
        } else {
            ++defective;  // each unparseable formula counts as its own original
        }
        CellRef ref = g.ref_of(i);
        const Cell* cell = wb.sheets[g.nodes[i].sheet].find_cell(ref.col, ref.row);
        size_t len = cell ? cell->text.size() : 0;
        m.formula_length_histogram[static_cast<int>(len / 20) * 20]++;
    }
    m.unique_formula_count = unique.size() + defective;
    m.repeated_cells = m.formula_cells - m.unique_formula_count;
    m.repeated_per_original =
        m.unique_formula_count ? static_cast<double>(m.repeated_cells) / m.unique_formula_count
                               : 0.0;

    size_t total_in = 0, total_out = 0;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        total_in += g.in_edges[i].size();
        total_out += g.out_edges[i].size();
        m.max_precedents = std::max(m.max_precedents, g.in_edges[i].size());
        m.max_dependents = std::max(m.max_dependents, g.out_edges[i].size());
        for (int dep : g.out_edges[i]) {
            const auto& a = g.nodes[i];
            const auto& b = g.nodes[dep];
            if (a.sheet != b.sheet) {
                ++m.cross_sheet_edge_count;
            } else {
                int dist = std::max(std::abs(a.col - b.col), std::abs(a.row - b.row));
                m.locality_histogram[detail::locality_bucket(dist)]++;
            }
        }
    }
    if (!g.nodes.empty()) {
        m.mean_precedents = static_cast<double>(total_in) / g.nodes.size();
        m.mean_dependents = static_cast<double>(total_out) / g.nodes.size();
    }
    m.estimated_review_hours =
        formulas_per_hour > 0 ? m.unique_formula_count / formulas_per_hour : 0.0;
    return m;
}

inline json metrics_to_json(const Metrics& m) {
    json hist = json::object();
    for (const auto& [bucket, count] : m.formula_length_histogram)
        hist[std::to_string(bucket)] = count;
    json loc = json::object();
    for (const auto& [bucket, count] : m.locality_histogram) loc[bucket] = count;
    return json{{"total_cells", m.total_cells},
                {"formula_cells", m.formula_cells},
                {"unique_formula_count", m.unique_formula_count},
                {"repeated_cells", m.repeated_cells},
                {"original_to_repeated_ratio", "1:" + render_number(m.repeated_per_original)},
                {"repeated_per_original", m.repeated_per_original},
                {"formula_length_histogram", hist},
                {"max_precedents", m.max_precedents},
                {"mean_precedents", m.mean_precedents},
                {"max_dependents", m.max_dependents},
                {"mean_dependents", m.mean_dependents},
                {"cross_sheet_edge_count", m.cross_sheet_edge_count},
                {"locality_histogram", loc},
                {"estimated_review_hours", m.estimated_review_hours}};
}

/// Edge list in the documented line format, one "precedent -> dependent" pair
/// per line, grouped by dependent in evaluation-stable order.
inline std::string render_edge_list(const DepGraph& g) {
    std::string out;
    for (size_t v = 0; v < g.nodes.size(); ++v)
        for (int u : g.in_edges[v]) {
            out += render_a1(g.ref_of(u));
            out += " -> ";
            out += render_a1(g.ref_of(static_cast<int>(v)));
            out += '\n';
        }
    return out;
}

}  // namespace cellsentry
