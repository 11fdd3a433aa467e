#pragma once

// Random generators shared by the property tests and the acceptance suite.

#include <random>

#include "cellsentry/formula.hpp"

namespace gen {

using cellsentry::BinOp;
using cellsentry::CellRef;
using cellsentry::Expr;
using cellsentry::RangeRef;
using cellsentry::UnOp;

struct AstGen {
    std::mt19937 rng;
    explicit AstGen(uint32_t seed) : rng(seed) {}

    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

    CellRef ref(bool with_sheet_allowed = true) {
        static const char* sheets[] = {"", "", "S", "Data Tab", "P&L", "S2"};
        CellRef r;
        r.sheet = with_sheet_allowed ? sheets[pick(0, 5)] : "";
        // mid-grid so fill-copy shifts stay in bounds
        r.col = pick(20, 60);
        r.row = pick(20, 60);
        r.col_abs = pick(0, 1) == 1;
        r.row_abs = pick(0, 1) == 1;
        return r;
    }

    Expr leaf() {
        switch (pick(0, 7)) {
            case 0: return Expr::num(pick(0, 4) == 0 ? 0.0 : pick(1, 9999) / 16.0);
            case 1: {
                static const char* strs[] = {"", "a", "ab c", "say \"hi\"", "x,y"};
                return Expr::str(strs[pick(0, 4)]);
            }
            case 2: return Expr::boolean_lit(pick(0, 1) == 1);
            case 3: {
                static const cellsentry::ErrorCode codes[] = {
                    cellsentry::ErrorCode::Div0, cellsentry::ErrorCode::Ref,
                    cellsentry::ErrorCode::Value, cellsentry::ErrorCode::Name,
                    cellsentry::ErrorCode::NA, cellsentry::ErrorCode::Num,
                    cellsentry::ErrorCode::Null};
                return Expr::error_lit(codes[pick(0, 6)]);
            }
            case 4: case 5: return Expr::cell(ref());
            case 6: {
                CellRef a = ref();
                CellRef b = a;
                b.col = a.col + pick(0, 5);
                b.row = a.row + pick(0, 5);
                b.sheet = "";
                b.col_abs = pick(0, 1) == 1;
                b.row_abs = pick(0, 1) == 1;
                CellRef a2 = a;
                a2.sheet = a.sheet;
                RangeRef r(a2, b);
                r.end.sheet.clear();
                return Expr::cell_range(r);
            }
            default: {
                static const char* names[] = {"REV", "COSTS", "X_1", "NET.SALES"};
                return Expr::name(names[pick(0, 3)]);
            }
        }
    }

    Expr node(int depth) {
        if (depth <= 0) return leaf();
        switch (pick(0, 9)) {
            case 0: case 1: case 2: return leaf();
            case 3: {
                static const UnOp ops[] = {UnOp::Neg, UnOp::Plus, UnOp::Percent};
                return Expr::unary(ops[pick(0, 2)], node(depth - 1));
            }
            case 4: case 5: case 6: case 7: {
                static const BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div,
                                            BinOp::Pow, BinOp::Concat, BinOp::Eq, BinOp::Ne,
                                            BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge};
                return Expr::binary(ops[pick(0, 11)], node(depth - 1), node(depth - 1));
            }
            default: {
                static const char* fns[] = {"SUM", "IF", "MAX", "VLOOKUP", "FOO", "ROUND"};
                int argc = pick(0, 3);
                std::vector<Expr> args;
                for (int i = 0; i < argc; ++i) args.push_back(node(depth - 1));
                return Expr::call(fns[pick(0, 5)], std::move(args));
            }
        }
    }

    Expr formula() { return node(pick(1, 5)); }
};

/// Random digraph as adjacency lists (no parallel edges, self-loops allowed).
inline std::vector<std::vector<int>> random_digraph(std::mt19937& rng, int n, double density) {
    std::vector<std::vector<int>> adj(n);
    std::bernoulli_distribution edge(density);
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
            if (edge(rng)) adj[u].push_back(v);
    return adj;
}

/// Renders an abstract digraph as a one-column workbook: node i lives at
/// A(i+1); an edge u -> v makes cell v's formula reference cell u.
inline cellsentry::Workbook digraph_workbook(const std::vector<std::vector<int>>& adj) {
    int n = static_cast<int>(adj.size());
    std::vector<std::vector<int>> preds(n);
    for (int u = 0; u < n; ++u)
        for (int v : adj[u]) preds[v].push_back(u);
    cellsentry::Sheet sheet;
    sheet.name = "G";
    for (int v = 0; v < n; ++v) {
        if (preds[v].empty()) {
            sheet.cells[{v + 1, 1}] = cellsentry::Cell::num(v);
            continue;
        }
        std::string src = "=";
        for (size_t i = 0; i < preds[v].size(); ++i) {
            if (i) src += "+";
            src += "A" + std::to_string(preds[v][i] + 1);
        }
        sheet.cells[{v + 1, 1}] = cellsentry::Cell::formula(src);
    }
    cellsentry::Workbook wb;
    wb.sheets.push_back(std::move(sheet));
    return wb;
}

}  // namespace gen
