#pragma once

// Version comparison and dependency-aware re-review scoping: any model change
// between audit iterations must drive a re-review of everything it can reach.

#include "cellsentry/graph.hpp"

namespace cellsentry {

enum class DiffKind {
    Added, Removed, FormulaChanged, ValueChanged, NameChanged, SheetAdded, SheetRemoved
};

inline std::string_view diff_kind_text(DiffKind k) {
    switch (k) {
        case DiffKind::Added: return "added";
        case DiffKind::Removed: return "removed";
        case DiffKind::FormulaChanged: return "formula_changed";
        case DiffKind::ValueChanged: return "value_changed";
        case DiffKind::NameChanged: return "name_changed";
        case DiffKind::SheetAdded: return "sheet_added";
        case DiffKind::SheetRemoved: return "sheet_removed";
    }
    return "value_changed";
}

struct DiffEntry {
    DiffKind kind = DiffKind::ValueChanged;
    std::string location;  // "Sheet!A1", "name:X" or "sheet:X"
    std::string before;    // "(absent)" for one-sided entries
    std::string after;

    friend bool operator==(const DiffEntry&, const DiffEntry&) = default;
};

namespace detail {

/// Formula comparisons ignore whitespace outside string literals.
inline std::string strip_formula_ws(const std::string& src) {
    std::string out;
    bool in_string = false;
    for (char c : src) {
        if (c == '"') in_string = !in_string;
        if (!in_string && std::isspace(static_cast<unsigned char>(c))) continue;
        out += c;
    }
    return out;
}

inline std::string render_cell_content(const Cell& c) {
    switch (c.kind) {
        case Cell::Kind::Blank: return "(blank)";
        case Cell::Kind::Label: return "\"" + c.text + "\"";
        case Cell::Kind::Number: return render_number(c.number);
        case Cell::Kind::Bool: return c.boolean ? "TRUE" : "FALSE";
        case Cell::Kind::ErrorLiteral: return std::string(error_code_text(c.error));
        case Cell::Kind::Formula: {
            std::string out = c.text;
            if (c.cached) {
                out += " [cached ";
                if (std::holds_alternative<double>(*c.cached))
                    out += render_number(std::get<double>(*c.cached));
                else if (std::holds_alternative<std::string>(*c.cached))
                    out += "\"" + std::get<std::string>(*c.cached) + "\"";
                else
                    out += std::get<bool>(*c.cached) ? "TRUE" : "FALSE";
                out += "]";
            }
            return out;
        }
    }
    return "(blank)";
}

}  // namespace detail

/// Symmetric-complete comparison: replaying the entries transforms the old
/// content set into the new one. Whole added/removed sheets collapse to one
/// entry unless `verbose_sheets` asks for per-cell detail.
inline std::vector<DiffEntry> diff_workbooks(const Workbook& old_wb, const Workbook& new_wb,
                                             bool verbose_sheets = false) {
    std::vector<DiffEntry> out;

    // Defined names, matched case-insensitively.
    std::vector<const NamedRange*> old_names, new_names;
    for (const auto& n : old_wb.names) old_names.push_back(&n);
    for (const auto& n : new_wb.names) new_names.push_back(&n);
    auto name_key = [](const NamedRange* n) { return detail::upper_copy(n->name); };
    std::map<std::string, std::pair<const NamedRange*, const NamedRange*>> by_name;
    for (const auto* n : old_names) by_name[name_key(n)].first = n;
    for (const auto* n : new_names) by_name[name_key(n)].second = n;
    for (const auto& [key, pair] : by_name) {
        const auto* o = pair.first;
        const auto* n = pair.second;
        if (o && n && o->target_text == n->target_text) continue;
        DiffEntry e;
        e.kind = DiffKind::NameChanged;
        e.location = "name:" + (n ? n->name : o->name);
        e.before = o ? o->target_text : "(absent)";
        e.after = n ? n->target_text : "(absent)";
        out.push_back(std::move(e));
    }

    // Sheet-level additions and removals.
    std::vector<const Sheet*> removed_sheets, added_sheets, common_old, common_new;
    for (const auto& s : old_wb.sheets) {
        if (new_wb.find_sheet(s.name)) common_old.push_back(&s);
        else removed_sheets.push_back(&s);
    }
    for (const auto& s : new_wb.sheets) {
        if (old_wb.find_sheet(s.name)) common_new.push_back(&s);
        else added_sheets.push_back(&s);
    }
    for (const auto* s : removed_sheets)
        out.push_back({DiffKind::SheetRemoved, "sheet:" + s->name,
                       std::to_string(s->cells.size()) + " cells", "(absent)"});
    for (const auto* s : added_sheets)
        out.push_back({DiffKind::SheetAdded, "sheet:" + s->name, "(absent)",
                       std::to_string(s->cells.size()) + " cells"});

    struct CellEntry {
        std::string sheet_upper;
        GridPos pos;
        DiffEntry entry;
    };
    std::vector<CellEntry> cell_entries;
    auto emit_cell = [&](const std::string& sheet, GridPos pos, DiffKind kind,
                         std::string before, std::string after) {
        CellRef ref{sheet, pos.col, pos.row, false, false};
        cell_entries.push_back({detail::upper_copy(sheet), pos,
                                DiffEntry{kind, render_a1(ref), std::move(before),
                                          std::move(after)}});
    };

    if (verbose_sheets) {
        for (const auto* s : removed_sheets)
            for (const auto& [pos, cell] : s->cells)
                emit_cell(s->name, pos, DiffKind::Removed, detail::render_cell_content(cell),
                          "(absent)");
        for (const auto* s : added_sheets)
            for (const auto& [pos, cell] : s->cells)
                emit_cell(s->name, pos, DiffKind::Added, "(absent)",
                          detail::render_cell_content(cell));
    }

    // Cell-by-cell comparison of common sheets (ordered map merge).
    for (const auto* os : common_old) {
        const Sheet* ns = new_wb.find_sheet(os->name);
        auto oi = os->cells.begin();
        auto ni = ns->cells.begin();
        while (oi != os->cells.end() || ni != ns->cells.end()) {
            if (ni == ns->cells.end() || (oi != os->cells.end() && oi->first < ni->first)) {
                emit_cell(ns->name, oi->first, DiffKind::Removed,
                          detail::render_cell_content(oi->second), "(absent)");
                ++oi;
            } else if (oi == os->cells.end() || ni->first < oi->first) {
                emit_cell(ns->name, ni->first, DiffKind::Added, "(absent)",
                          detail::render_cell_content(ni->second));
                ++ni;
            } else {
                const Cell& oc = oi->second;
                const Cell& nc = ni->second;
                bool of = oc.is_formula(), nf = nc.is_formula();
                if (of != nf ||
                    (of && detail::strip_formula_ws(oc.text) != detail::strip_formula_ws(nc.text))) {
                    emit_cell(ns->name, ni->first, DiffKind::FormulaChanged,
                              detail::render_cell_content(oc), detail::render_cell_content(nc));
                } else if (of ? oc.cached != nc.cached : !(oc == nc)) {
                    // same formula up to whitespace: only the cached value can differ
                    emit_cell(ns->name, ni->first, DiffKind::ValueChanged,
                              detail::render_cell_content(oc), detail::render_cell_content(nc));
                }
                ++oi;
                ++ni;
            }
        }
    }

    std::sort(cell_entries.begin(), cell_entries.end(), [](const CellEntry& a, const CellEntry& b) {
        if (a.sheet_upper != b.sheet_upper) return a.sheet_upper < b.sheet_upper;
        return a.pos < b.pos;
    });
    for (auto& ce : cell_entries) out.push_back(std::move(ce.entry));
    return out;
}

inline json diff_entry_to_json(const DiffEntry& e) {
    return json{{"kind", std::string(diff_kind_text(e.kind))},
                {"loc", e.location},
                {"before", e.before},
                {"after", e.after}};
}

// ---------------------------------------------------------------------------
// Re-review scoping
// ---------------------------------------------------------------------------

struct ReReviewScope {
    std::vector<CellRef> changed;   // cells touched by the diff, new-version coordinates
    std::vector<CellRef> impacted;  // transitive dependents of the changed set
    size_t total_cell_count = 0;    // non-blank cells in the new version
};

/// Impact analysis on the new version's graph: a change can corrupt exactly
/// its transitive dependents, so they are what re-review must cover.
/// Named-range changes impact every cell referencing that name.
inline ReReviewScope rereview_scope(const std::vector<DiffEntry>& diff, const DepGraph& new_graph) {
    ReReviewScope scope;
    for (size_t i = 0; i < new_graph.nodes.size(); ++i)
        if (!new_graph.nodes[i].value_source) ++scope.total_cell_count;

    std::set<int> changed_nodes;
    std::set<std::pair<std::string, GridPos>> changed_positions;  // includes removed cells

    auto mark_cell = [&](const std::string& loc) {
        auto r = parse_range_text(loc);
        if (!r) return;
        changed_positions.insert({detail::upper_copy(r->start.sheet),
                                  GridPos{r->start.row, r->start.col}});
        int id = new_graph.find_node(r->start);
        if (id >= 0) changed_nodes.insert(id);
    };

    for (const DiffEntry& e : diff) {
        switch (e.kind) {
            case DiffKind::Added:
            case DiffKind::Removed:
            case DiffKind::FormulaChanged:
            case DiffKind::ValueChanged:
                mark_cell(e.location);
                break;
            case DiffKind::SheetAdded: {
                std::string name = e.location.substr(6);
                for (size_t i = 0; i < new_graph.nodes.size(); ++i)
                    if (detail::iequals(new_graph.sheet_names[new_graph.nodes[i].sheet], name) &&
                        !new_graph.nodes[i].value_source) {
                        changed_nodes.insert(static_cast<int>(i));
                        const auto& n = new_graph.nodes[i];
                        changed_positions.insert({detail::upper_copy(new_graph.sheet_names[n.sheet]),
                                                  GridPos{n.row, n.col}});
                    }
                break;
            }
            case DiffKind::SheetRemoved:
                break;  // nothing of it exists in the new version
            case DiffKind::NameChanged: {
                std::string name = detail::upper_copy(e.location.substr(5));
                auto it = new_graph.name_users.find(name);
                if (it != new_graph.name_users.end())
                    for (int id : it->second) {
                        changed_nodes.insert(id);
                        const auto& n = new_graph.nodes[id];
                        changed_positions.insert({detail::upper_copy(new_graph.sheet_names[n.sheet]),
                                                  GridPos{n.row, n.col}});
                    }
                break;
            }
        }
    }

    std::set<int> impacted;
    std::vector<int> stack(changed_nodes.begin(), changed_nodes.end());
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : new_graph.out_edges[v])
            if (impacted.insert(w).second) stack.push_back(w);
    }

    for (const auto& [sheet, pos] : changed_positions)
        scope.changed.push_back(CellRef{sheet, pos.col, pos.row, false, false});
    for (int id : impacted) scope.impacted.push_back(new_graph.ref_of(id));
    std::sort(scope.changed.begin(), scope.changed.end(), PositionLess{});
    std::sort(scope.impacted.begin(), scope.impacted.end(), PositionLess{});
    return scope;
}

inline json rereview_scope_to_json(const ReReviewScope& s) {
    json changed = json::array(), impacted = json::array();
    for (const auto& c : s.changed) changed.push_back(render_a1(c));
    for (const auto& c : s.impacted) impacted.push_back(render_a1(c));
    return json{{"changed", changed},
                {"impacted", impacted},
                {"total_cell_count", s.total_cell_count}};
}

}  // namespace cellsentry
