#include <catch2/catch_amalgamated.hpp>

#include "cellsentry/formula.hpp"
#include "gen.hpp"

using namespace cellsentry;

namespace {

Workbook name_fixture() {
    json doc = json::parse(R"x({
      "sheets":[{"name":"S","cells":{"C1":{"v":1}}},
                {"name":"P&L","cells":{"A1":{"v":1},"A5":{"v":5}}}],
      "names":[{"name":"Rev","ref":"'P&L'!A1:A5"}]})x");
    return load_workbook_json(doc, "fixture");
}

}  // namespace

TEST_CASE("grammar-forced shapes parse as specified") {
    FormulaAst sum = parse_formula("=SUM(A1:A3)");
    REQUIRE(sum.kind == Expr::Kind::Call);
    CHECK(sum.text == "SUM");
    REQUIRE(sum.args.size() == 1);
    CHECK(sum.args[0].kind == Expr::Kind::RangeReference);

    FormulaAst nested = parse_formula("=IF(C1>0,VLOOKUP(D1,'Tab'!A1:B9,2,FALSE),0)");
    REQUIRE(nested.kind == Expr::Kind::Call);
    CHECK(nested.text == "IF");
    REQUIRE(nested.args.size() == 3);
    CHECK(nested.args[0].kind == Expr::Kind::Binary);
    CHECK(nested.args[0].bin_op == BinOp::Gt);
    REQUIRE(nested.args[1].kind == Expr::Kind::Call);
    CHECK(nested.args[1].text == "VLOOKUP");
    CHECK(nested.args[1].args[1].range.start.sheet == "Tab");
    CHECK(nested.args[2].number == 0.0);

    FormulaAst prec = parse_formula("=1+2*3");
    REQUIRE(prec.kind == Expr::Kind::Binary);
    CHECK(prec.bin_op == BinOp::Add);
    CHECK(prec.args[0].number == 1.0);
    CHECK(prec.args[1].bin_op == BinOp::Mul);
}

TEST_CASE("precedence: percent, unary minus, power, comparisons") {
    FormulaAst a = parse_formula("=-2^2");  // unary binds tighter than ^
    REQUIRE(a.kind == Expr::Kind::Binary);
    CHECK(a.bin_op == BinOp::Pow);
    CHECK(a.args[0].kind == Expr::Kind::Unary);

    FormulaAst b = parse_formula("=50%");
    REQUIRE(b.kind == Expr::Kind::Unary);
    CHECK(b.un_op == UnOp::Percent);

    FormulaAst c = parse_formula("=1<2&\"x\"");  // & binds tighter than <
    REQUIRE(c.kind == Expr::Kind::Binary);
    CHECK(c.bin_op == BinOp::Lt);
    CHECK(c.args[1].bin_op == BinOp::Concat);

    FormulaAst d = parse_formula("=2^3^2");  // left-associative power
    CHECK(d.args[0].kind == Expr::Kind::Binary);
    CHECK(d.args[1].number == 2.0);
}

TEST_CASE("rendering is a parse inverse with minimal parentheses") {
    CHECK(render(parse_formula("=A1+B1")) == "=A1+B1");
    Expr forced = Expr::binary(BinOp::Mul, Expr::binary(BinOp::Add, Expr::num(1), Expr::num(2)),
                               Expr::num(3));
    CHECK(render(forced) == "=(1+2)*3");
    CellRef abs_a1{"", 1, 1, true, true};
    CHECK(render(Expr::cell(abs_a1), RefStyle::R1C1, CellRef{"S", 2, 2}) == "=R1C1");
    CHECK(render(parse_formula("= 1 +  2")) == "=1+2");  // whitespace-insensitive
    CHECK(render(parse_formula("=\"say \"\"hi\"\"\"")) == "=\"say \"\"hi\"\"\"");
    CHECK(render(parse_formula("=a1+sum(b2)")) == "=A1+SUM(B2)");  // case normalization
    CHECK_THROWS_AS(render(parse_formula("=A1"), RefStyle::R1C1, CellRef{"S", 0, 0}),
                    std::invalid_argument);
}

TEST_CASE("parse errors carry character offsets") {
    CHECK_THROWS_AS(parse_formula("1+1"), ParseError);  // missing '='
    try {
        parse_formula("=1+");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset == 2);  // offset within the body after '='
    }
    CHECK_THROWS_AS(parse_formula("=#ERR!"), ParseError);   // not a real token
    CHECK_THROWS_AS(parse_formula("=#CIRC!"), ParseError);  // engine-only code
    CHECK_THROWS_AS(parse_formula("=SUM(1,"), ParseError);
    CHECK_THROWS_AS(parse_formula("=TRUE(1)"), ParseError);
    CHECK_THROWS_AS(parse_formula("=$FOO"), ParseError);
    CHECK_NOTHROW(parse_formula("=SUMM(A1)"));  // unknown functions still parse
}

TEST_CASE("normalization encodes offsets from the owning cell") {
    CellRef b2{"S", 2, 2, false, false};
    CHECK(normalize_r1c1(parse_formula("=A1"), b2).text == "=R[-1]C[-1]");
    CHECK(normalize_r1c1(parse_formula("=$A$1"), b2).text == "=R1C1");
    CHECK(normalize_r1c1(parse_formula("=B1"), b2).text == "=R[-1]C");
    CHECK(normalize_r1c1(parse_formula("=$A1"), b2).text == "=R[-1]C1");

    CellRef b9{"S", 2, 9, false, false};
    CHECK(normalize_r1c1(parse_formula("=A1"), b2) == normalize_r1c1(parse_formula("=A8"), b9));

    // Sheet case differences vanish under normalization.
    CHECK(normalize_r1c1(parse_formula("=data!A1"), b2) ==
          normalize_r1c1(parse_formula("=DATA!A1"), b2));
}

TEST_CASE("reference extraction resolves names and keeps dangling targets") {
    Workbook wb = name_fixture();
    CellRef origin{"S", 3, 1, false, false};

    auto refs = collect_refs(parse_formula("=SUM(A1:A3)+B7"), origin, wb);
    REQUIRE(refs.size() == 2);
    CHECK(refs[0].kind == RefUse::Kind::Range);
    CHECK(render_range(refs[0].target) == "S!A1:A3");
    CHECK(refs[1].kind == RefUse::Kind::Cell);
    CHECK(render_range(refs[1].target) == "S!B7");

    auto named = collect_refs(parse_formula("=Rev*2"), origin, wb);
    REQUIRE(named.size() == 1);
    CHECK(named[0].via_name == "REV");
    CHECK(render_range(named[0].target) == "'P&L'!A1:A5");

    CHECK(collect_refs(parse_formula("=5+6"), origin, wb).empty());

    auto dangling = collect_refs(parse_formula("=Gone!A1+Unknown"), origin, wb);
    REQUIRE(dangling.size() == 2);
    CHECK(dangling[0].kind == RefUse::Kind::DanglingSheet);
    CHECK(dangling[1].kind == RefUse::Kind::DanglingName);

    // duplicates appear once per occurrence
    CHECK(collect_refs(parse_formula("=A1+A1"), origin, wb).size() == 2);
}

TEST_CASE("property: parse-render-parse is a fixed point") {
    gen::AstGen g(2026);
    for (int i = 0; i < 300; ++i) {
        Expr ast = g.formula();
        std::string text = render(ast);
        FormulaAst once = parse_formula(text);
        FormulaAst twice = parse_formula(render(once));
        REQUIRE(twice == once);
    }
}

TEST_CASE("property: normalization is idempotent through denormalization") {
    gen::AstGen g(4242);
    for (int i = 0; i < 150; ++i) {
        Expr ast = parse_formula(render(g.formula()));
        CellRef origin{"S", g.pick(1, 100), g.pick(1, 100), false, false};
        NormalizedFormula n1 = normalize_r1c1(ast, origin);
        FormulaAst back = denormalize_r1c1(n1, origin);
        CHECK(normalize_r1c1(back, origin) == n1);
    }
}

TEST_CASE("property: fill-copies normalize identically") {
    gen::AstGen g(808);
    for (int i = 0; i < 150; ++i) {
        Expr ast = parse_formula(render(g.formula()));
        CellRef origin{"S", g.pick(30, 50), g.pick(30, 50), false, false};
        int drow = g.pick(-10, 10), dcol = g.pick(-10, 10);
        CellRef moved = origin;
        moved.row += drow;
        moved.col += dcol;
        Expr shifted = shift_relative_refs(ast, drow, dcol);
        CHECK(normalize_r1c1(shifted, moved) == normalize_r1c1(ast, origin));
    }
}

TEST_CASE("number literal round-trips keep exact values") {
    for (double v : {0.1, 1e-300, 6.02214076e23, 12345.6789, 4503599627370495.0}) {
        FormulaAst ast = parse_formula("=" + render_number(v));
        REQUIRE(ast.kind == Expr::Kind::Number);
        CHECK(ast.number == v);
    }
    CHECK(parse_formula("=1e3").number == 1000.0);
    CHECK(parse_formula("=.5").number == 0.5);
    CHECK(parse_formula("=5.").number == 5.0);
}
