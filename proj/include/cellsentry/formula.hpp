#pragma once

// Excel-style formula text: lexer, recursive-descent parser, A1 and R1C1
// rendering, copy-invariant normalization, and reference extraction.
//
// Grammar scope: numbers, strings ("" escape), TRUE/FALSE, error literals,
// A1 references with optional $ fixity and sheet qualifiers, ranges, defined
// names, the full operator set and function calls with 0..255 arguments.
// Unknown function names parse successfully; they are a review finding, not
// a parse failure.

#include <charconv>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cellsentry/model.hpp"

namespace cellsentry {

inline constexpr int kMaxCallArgs = 255;

enum class UnOp { Neg, Plus, Percent };
enum class BinOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };

inline std::string_view bin_op_text(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Pow: return "^";
        case BinOp::Concat: return "&";
        case BinOp::Eq: return "=";
        case BinOp::Ne: return "<>";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
    }
    return "?";
}

struct Expr {
    enum class Kind {
        Number, Text, Bool, Error,
        CellReference, RangeReference, NameReference,
        Unary, Binary, Call
    };

    Kind kind = Kind::Number;
    double number = 0.0;
    std::string text;   // Text literal, Call function name, NameReference name
    bool boolean = false;
    ErrorCode error = ErrorCode::Value;
    CellRef ref;
    RangeRef range;
    UnOp un_op = UnOp::Neg;
    BinOp bin_op = BinOp::Add;
    std::vector<Expr> args;

    static Expr num(double v) { Expr e; e.kind = Kind::Number; e.number = v; return e; }
    static Expr str(std::string s) { Expr e; e.kind = Kind::Text; e.text = std::move(s); return e; }
    static Expr boolean_lit(bool b) { Expr e; e.kind = Kind::Bool; e.boolean = b; return e; }
    static Expr error_lit(ErrorCode c) { Expr e; e.kind = Kind::Error; e.error = c; return e; }
    static Expr cell(CellRef r) { Expr e; e.kind = Kind::CellReference; e.ref = r; return e; }
    static Expr cell_range(RangeRef r) { Expr e; e.kind = Kind::RangeReference; e.range = r; return e; }
    static Expr name(std::string n) { Expr e; e.kind = Kind::NameReference; e.text = std::move(n); return e; }
    static Expr unary(UnOp op, Expr operand) {
        Expr e;
        e.kind = Kind::Unary;
        e.un_op = op;
        e.args.push_back(std::move(operand));
        return e;
    }
    static Expr binary(BinOp op, Expr lhs, Expr rhs) {
        Expr e;
        e.kind = Kind::Binary;
        e.bin_op = op;
        e.args.push_back(std::move(lhs));
        e.args.push_back(std::move(rhs));
        return e;
    }
    static Expr call(std::string fn, std::vector<Expr> arguments) {
        Expr e;
        e.kind = Kind::Call;
        e.text = detail::upper_copy(fn);
        e.args = std::move(arguments);
        return e;
    }

    friend bool operator==(const Expr& a, const Expr& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Kind::Number: return a.number == b.number;
            case Kind::Text: return a.text == b.text;
            case Kind::Bool: return a.boolean == b.boolean;
            case Kind::Error: return a.error == b.error;
            case Kind::CellReference: return a.ref == b.ref;
            case Kind::RangeReference: return a.range == b.range;
            case Kind::NameReference: return a.text == b.text;
            case Kind::Unary: return a.un_op == b.un_op && a.args == b.args;
            case Kind::Binary: return a.bin_op == b.bin_op && a.args == b.args;
            case Kind::Call: return a.text == b.text && a.args == b.args;
        }
        return false;
    }
};

using FormulaAst = Expr;

struct ParseError : std::runtime_error {
    size_t offset;
    ParseError(std::string msg, size_t at)
        : std::runtime_error(std::move(msg) + " at offset " + std::to_string(at)), offset(at) {}
};

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace detail {

enum class TokKind {
    End, Number, String, Bool, Error, Ref, R1C1Ref, Ident, QuotedSheet,
    Bang, LParen, RParen, Comma, Colon, Percent, Dollar, Op
};

struct Token {
    TokKind kind = TokKind::End;
    size_t pos = 0;
    std::string text;      // raw text for Ref/Ident/QuotedSheet/String
    double number = 0.0;
    bool boolean = false;
    ErrorCode error = ErrorCode::Value;
    BinOp op = BinOp::Add;
    // R1C1 component decoding
    bool r1_row_abs = false, r1_col_abs = false;
    long r1_row = 0, r1_col = 0;  // absolute coordinate or relative offset
};

class Lexer {
public:
    Lexer(std::string_view src, bool r1c1) : src_(src), r1c1_(r1c1) {}

    Token next() {
        skip_ws();
        Token t;
        t.pos = pos_;
        if (pos_ >= src_.size()) return t;
        char c = src_[pos_];

        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            return lex_number();
        }
        if (c == '"') return lex_string();
        if (c == '\'') return lex_quoted_sheet();
        if (c == '#') return lex_error_literal();
        if (r1c1_ && (c == 'R' || c == 'r')) {
            Token t2;
            if (try_lex_r1c1(t2)) return t2;
        }
        if (is_ident_start(c) || c == '$') return lex_word();

        ++pos_;
        switch (c) {
            case '!': t.kind = TokKind::Bang; return t;
            case '(': t.kind = TokKind::LParen; return t;
            case ')': t.kind = TokKind::RParen; return t;
            case ',': t.kind = TokKind::Comma; return t;
            case ':': t.kind = TokKind::Colon; return t;
            case '%': t.kind = TokKind::Percent; return t;
            case '+': t.kind = TokKind::Op; t.op = BinOp::Add; return t;
            case '-': t.kind = TokKind::Op; t.op = BinOp::Sub; return t;
            case '*': t.kind = TokKind::Op; t.op = BinOp::Mul; return t;
            case '/': t.kind = TokKind::Op; t.op = BinOp::Div; return t;
            case '^': t.kind = TokKind::Op; t.op = BinOp::Pow; return t;
            case '&': t.kind = TokKind::Op; t.op = BinOp::Concat; return t;
            case '=': t.kind = TokKind::Op; t.op = BinOp::Eq; return t;
            case '<':
                t.kind = TokKind::Op;
                if (pos_ < src_.size() && src_[pos_] == '=') { ++pos_; t.op = BinOp::Le; }
                else if (pos_ < src_.size() && src_[pos_] == '>') { ++pos_; t.op = BinOp::Ne; }
                else t.op = BinOp::Lt;
                return t;
            case '>':
                t.kind = TokKind::Op;
                if (pos_ < src_.size() && src_[pos_] == '=') { ++pos_; t.op = BinOp::Ge; }
                else t.op = BinOp::Gt;
                return t;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", t.pos);
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    Token lex_number() {
        Token t;
        t.pos = pos_;
        t.kind = TokKind::Number;
        size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            size_t save = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        std::string text(src_.substr(start, pos_ - start));
        t.number = std::strtod(text.c_str(), nullptr);
        return t;
    }

    Token lex_string() {
        Token t;
        t.pos = pos_;
        t.kind = TokKind::String;
        ++pos_;  // opening quote
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '"') {
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '"') {
                    t.text += '"';
                    pos_ += 2;
                    continue;
                }
                ++pos_;
                return t;
            }
            t.text += c;
            ++pos_;
        }
        throw ParseError("unterminated string literal", t.pos);
    }

    Token lex_quoted_sheet() {
        Token t;
        t.pos = pos_;
        t.kind = TokKind::QuotedSheet;
        ++pos_;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\'') {
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '\'') {
                    t.text += '\'';
                    pos_ += 2;
                    continue;
                }
                ++pos_;
                if (t.text.empty()) throw ParseError("empty sheet name", t.pos);
                return t;
            }
            t.text += c;
            ++pos_;
        }
        throw ParseError("unterminated sheet name", t.pos);
    }

    Token lex_error_literal() {
        Token t;
        t.pos = pos_;
        t.kind = TokKind::Error;
        // Longest prefix match against the closed token set, so "#N/A/2"
        // lexes as #N/A followed by a division.
        static const std::pair<const char*, ErrorCode> tokens[] = {
            {"#DIV/0!", ErrorCode::Div0}, {"#VALUE!", ErrorCode::Value},
            {"#NAME?", ErrorCode::Name},  {"#NULL!", ErrorCode::Null},
            {"#NUM!", ErrorCode::Num},    {"#REF!", ErrorCode::Ref},
            {"#N/A", ErrorCode::NA},
        };
        std::string_view rest = src_.substr(pos_);
        for (const auto& [text, code] : tokens) {
            std::string_view tok(text);
            if (rest.size() >= tok.size()) {
                bool match = true;
                for (size_t i = 0; i < tok.size(); ++i)
                    if (ascii_upper(rest[i]) != tok[i]) { match = false; break; }
                if (match) {
                    pos_ += tok.size();
                    t.error = code;
                    return t;
                }
            }
        }
        size_t end = pos_ + 1;
        while (end < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '/'))
            ++end;
        if (end < src_.size() && (src_[end] == '!' || src_[end] == '?')) ++end;
        throw ParseError(
            "unknown error-literal token '" + std::string(src_.substr(pos_, end - pos_)) + "'",
            t.pos);
    }

    // Maximal run of identifier/reference characters, then classify.
    Token lex_word() {
        Token t;
        t.pos = pos_;
        size_t start = pos_;
        while (pos_ < src_.size() && (is_ident_char(src_[pos_]) || src_[pos_] == '$')) ++pos_;
        std::string text(src_.substr(start, pos_ - start));
        if (text.find('$') != std::string::npos) {
            if (!is_a1_address(text))
                throw ParseError("malformed reference '" + text + "'", t.pos);
            t.kind = TokKind::Ref;
            t.text = std::move(text);
            return t;
        }
        if (is_a1_address(text)) {
            t.kind = TokKind::Ref;
            t.text = std::move(text);
            return t;
        }
        if (iequals(text, "TRUE") || iequals(text, "FALSE")) {
            t.kind = TokKind::Bool;
            t.boolean = iequals(text, "TRUE");
            return t;
        }
        if (!is_ident_start(text[0]))
            throw ParseError("unexpected token '" + text + "'", t.pos);
        t.kind = TokKind::Ident;
        t.text = std::move(text);
        return t;
    }

    // R<part>C<part> where <part> is empty, digits, or [signed digits].
    bool try_lex_r1c1(Token& t) {
        size_t save = pos_;
        t = Token{};
        t.pos = pos_;
        auto part = [&](bool& abs, long& val) -> bool {
            if (pos_ < src_.size() && src_[pos_] == '[') {
                ++pos_;
                size_t d0 = pos_;
                if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) ++pos_;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
                if (pos_ >= src_.size() || src_[pos_] != ']' || pos_ == d0) return false;
                val = std::strtol(std::string(src_.substr(d0, pos_ - d0)).c_str(), nullptr, 10);
                ++pos_;
                abs = false;
                return true;
            }
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                size_t d0 = pos_;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
                val = std::strtol(std::string(src_.substr(d0, pos_ - d0)).c_str(), nullptr, 10);
                abs = true;
                return true;
            }
            abs = false;
            val = 0;
            return true;  // bare R / C: relative offset zero
        };
        if (src_[pos_] != 'R' && src_[pos_] != 'r') return false;
        ++pos_;
        if (!part(t.r1_row_abs, t.r1_row)) { pos_ = save; return false; }
        if (pos_ >= src_.size() || (src_[pos_] != 'C' && src_[pos_] != 'c')) { pos_ = save; return false; }
        ++pos_;
        if (!part(t.r1_col_abs, t.r1_col)) { pos_ = save; return false; }
        // A trailing identifier character means this was a word like "RC1X".
        if (pos_ < src_.size() && (is_ident_char(src_[pos_]) || src_[pos_] == '$')) {
            pos_ = save;
            return false;
        }
        t.kind = TokKind::R1C1Ref;
        return true;
    }

    std::string_view src_;
    size_t pos_ = 0;
    bool r1c1_ = false;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
public:
    Parser(std::string_view body, bool r1c1, CellRef origin)
        : lex_(body, r1c1), r1c1_(r1c1), origin_(origin) {
        advance();
    }

    Expr parse() {
        Expr e = parse_comparison();
        if (tok_.kind != TokKind::End)
            throw ParseError("trailing input after formula", tok_.pos);
        return e;
    }

private:
    void advance() { tok_ = lex_.next(); }

    bool at_op(BinOp op) const { return tok_.kind == TokKind::Op && tok_.op == op; }

    Expr parse_comparison() {
        Expr lhs = parse_concat();
        while (tok_.kind == TokKind::Op &&
               (tok_.op == BinOp::Eq || tok_.op == BinOp::Ne || tok_.op == BinOp::Lt ||
                tok_.op == BinOp::Le || tok_.op == BinOp::Gt || tok_.op == BinOp::Ge)) {
            BinOp op = tok_.op;
            advance();
            lhs = Expr::binary(op, std::move(lhs), parse_concat());
        }
        return lhs;
    }

    Expr parse_concat() {
        Expr lhs = parse_additive();
        while (at_op(BinOp::Concat)) {
            advance();
            lhs = Expr::binary(BinOp::Concat, std::move(lhs), parse_additive());
        }
        return lhs;
    }

    Expr parse_additive() {
        Expr lhs = parse_multiplicative();
        while (at_op(BinOp::Add) || at_op(BinOp::Sub)) {
            BinOp op = tok_.op;
            advance();
            lhs = Expr::binary(op, std::move(lhs), parse_multiplicative());
        }
        return lhs;
    }

    Expr parse_multiplicative() {
        Expr lhs = parse_power();
        while (at_op(BinOp::Mul) || at_op(BinOp::Div)) {
            BinOp op = tok_.op;
            advance();
            lhs = Expr::binary(op, std::move(lhs), parse_power());
        }
        return lhs;
    }

    Expr parse_power() {
        Expr lhs = parse_unary();
        while (at_op(BinOp::Pow)) {
            advance();
            lhs = Expr::binary(BinOp::Pow, std::move(lhs), parse_unary());
        }
        return lhs;
    }

    Expr parse_unary() {
        if (at_op(BinOp::Sub)) {
            advance();
            return Expr::unary(UnOp::Neg, parse_unary());
        }
        if (at_op(BinOp::Add)) {
            advance();
            return Expr::unary(UnOp::Plus, parse_unary());
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        Expr e = parse_primary();
        while (tok_.kind == TokKind::Percent) {
            advance();
            e = Expr::unary(UnOp::Percent, std::move(e));
        }
        return e;
    }

    CellRef decode_ref(const Token& t, const std::string& sheet) const {
        if (t.kind == TokKind::R1C1Ref) {
            CellRef r;
            r.sheet = sheet;
            r.row_abs = t.r1_row_abs;
            r.col_abs = t.r1_col_abs;
            r.row = t.r1_row_abs ? static_cast<int>(t.r1_row)
                                 : origin_.row + static_cast<int>(t.r1_row);
            r.col = t.r1_col_abs ? static_cast<int>(t.r1_col)
                                 : origin_.col + static_cast<int>(t.r1_col);
            if (!r.in_bounds()) throw ParseError("reference out of bounds", t.pos);
            return r;
        }
        auto cr = parse_a1_local(t.text);
        if (!cr) throw ParseError("malformed reference '" + t.text + "'", t.pos);
        cr->sheet = sheet;
        return *cr;
    }

    bool is_ref_token(const Token& t) const {
        return t.kind == TokKind::Ref || t.kind == TokKind::R1C1Ref;
    }

    Expr parse_ref_or_range(const Token& first, const std::string& sheet) {
        CellRef a = decode_ref(first, sheet);
        if (tok_.kind == TokKind::Colon) {
            advance();
            if (!is_ref_token(tok_))
                throw ParseError("expected cell reference after ':'", tok_.pos);
            Token second = tok_;
            advance();
            CellRef b = decode_ref(second, sheet);
            return Expr::cell_range(RangeRef(a, b));
        }
        return Expr::cell(a);
    }

    Expr parse_primary() {
        Token t = tok_;
        switch (t.kind) {
            case TokKind::Number:
                advance();
                return Expr::num(t.number);
            case TokKind::String:
                advance();
                return Expr::str(t.text);
            case TokKind::Bool:
                advance();
                if (tok_.kind == TokKind::LParen)
                    throw ParseError("TRUE/FALSE cannot be used as a function", tok_.pos);
                return Expr::boolean_lit(t.boolean);
            case TokKind::Error:
                advance();
                return Expr::error_lit(t.error);
            case TokKind::LParen: {
                advance();
                Expr inner = parse_comparison();
                if (tok_.kind != TokKind::RParen) throw ParseError("expected ')'", tok_.pos);
                advance();
                return inner;
            }
            case TokKind::QuotedSheet: {
                advance();
                if (tok_.kind != TokKind::Bang)
                    throw ParseError("expected '!' after sheet name", tok_.pos);
                advance();
                if (!is_ref_token(tok_))
                    throw ParseError("expected cell reference after sheet qualifier", tok_.pos);
                Token ref = tok_;
                advance();
                return parse_ref_or_range(ref, t.text);
            }
            case TokKind::Ref:
            case TokKind::R1C1Ref: {
                advance();
                if (tok_.kind == TokKind::Bang && t.kind == TokKind::Ref) {
                    // "S2!A1": a reference-shaped token used as a sheet name.
                    advance();
                    if (!is_ref_token(tok_))
                        throw ParseError("expected cell reference after sheet qualifier", tok_.pos);
                    Token ref = tok_;
                    advance();
                    return parse_ref_or_range(ref, t.text);
                }
                return parse_ref_or_range(t, "");
            }
            case TokKind::Ident: {
                advance();
                if (tok_.kind == TokKind::LParen) {
                    advance();
                    std::vector<Expr> args;
                    if (tok_.kind != TokKind::RParen) {
                        args.push_back(parse_comparison());
                        while (tok_.kind == TokKind::Comma) {
                            advance();
                            args.push_back(parse_comparison());
                        }
                    }
                    if (tok_.kind != TokKind::RParen) throw ParseError("expected ')'", tok_.pos);
                    if (args.size() > kMaxCallArgs)
                        throw ParseError("too many arguments to " + t.text, t.pos);
                    advance();
                    return Expr::call(t.text, std::move(args));
                }
                if (tok_.kind == TokKind::Bang) {
                    advance();
                    if (!is_ref_token(tok_))
                        throw ParseError("expected cell reference after sheet qualifier", tok_.pos);
                    Token ref = tok_;
                    advance();
                    return parse_ref_or_range(ref, t.text);
                }
                return Expr::name(upper_copy(t.text));
            }
            default:
                throw ParseError("expected an expression", t.pos);
        }
    }

    Lexer lex_;
    Token tok_;
    bool r1c1_;
    CellRef origin_;
};

}  // namespace detail

/// Parses "=..." source in A1 style. Whitespace-insensitive outside strings.
inline FormulaAst parse_formula(std::string_view source) {
    if (source.empty() || source[0] != '=')
        throw ParseError("formula must begin with '='", 0);
    detail::Parser p(source.substr(1), /*r1c1=*/false, CellRef{});
    return p.parse();
}

/// Parses "=..." source in R1C1 style, resolving offsets against `origin`.
inline FormulaAst parse_formula_r1c1(std::string_view source, const CellRef& origin) {
    if (source.empty() || source[0] != '=')
        throw ParseError("formula must begin with '='", 0);
    detail::Parser p(source.substr(1), /*r1c1=*/true, origin);
    return p.parse();
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

enum class RefStyle { A1, R1C1 };

/// Canonical shortest decimal text for a double; parses back to the same value.
inline std::string render_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline int expr_precedence(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Binary:
            switch (e.bin_op) {
                case BinOp::Eq: case BinOp::Ne: case BinOp::Lt:
                case BinOp::Le: case BinOp::Gt: case BinOp::Ge: return 1;
                case BinOp::Concat: return 2;
                case BinOp::Add: case BinOp::Sub: return 3;
                case BinOp::Mul: case BinOp::Div: return 4;
                case BinOp::Pow: return 5;
            }
            return 1;
        case Expr::Kind::Unary:
            return e.un_op == UnOp::Percent ? 7 : 6;
        default:
            return 100;
    }
}

struct RenderOpts {
    RefStyle style = RefStyle::A1;
    CellRef origin;
    bool uppercase_sheets = false;  // normalization canonicalizes sheet case
};

inline std::string render_r1c1_component(char axis, bool abs, int coord, int origin_coord) {
    std::string out(1, axis);
    if (abs) {
        out += std::to_string(coord);
    } else if (coord != origin_coord) {
        out += '[';
        out += std::to_string(coord - origin_coord);
        out += ']';
    }
    return out;
}

inline std::string render_ref(const CellRef& ref, const RenderOpts& o) {
    std::string out;
    if (!ref.sheet.empty()) {
        std::string sheet = o.uppercase_sheets ? upper_copy(ref.sheet) : ref.sheet;
        out += render_sheet_prefix(sheet);
    }
    if (o.style == RefStyle::A1) {
        out += render_a1_local(ref);
    } else {
        out += render_r1c1_component('R', ref.row_abs, ref.row, o.origin.row);
        out += render_r1c1_component('C', ref.col_abs, ref.col, o.origin.col);
    }
    return out;
}

inline std::string render_range_expr(const RangeRef& r, const RenderOpts& o) {
    CellRef end_local = r.end;
    end_local.sheet.clear();
    CellRef start = r.start;
    std::string out = render_ref(start, o);
    out += ':';
    out += render_ref(end_local, o);
    return out;
}

inline void render_expr(const Expr& e, const RenderOpts& o, std::string& out) {
    auto child = [&](const Expr& c, bool parens) {
        if (parens) {
            out += '(';
            render_expr(c, o, out);
            out += ')';
        } else {
            render_expr(c, o, out);
        }
    };
    switch (e.kind) {
        case Expr::Kind::Number:
            out += render_number(e.number);
            return;
        case Expr::Kind::Text: {
            out += '"';
            for (char c : e.text) {
                out += c;
                if (c == '"') out += '"';
            }
            out += '"';
            return;
        }
        case Expr::Kind::Bool:
            out += e.boolean ? "TRUE" : "FALSE";
            return;
        case Expr::Kind::Error:
            out += error_code_text(e.error);
            return;
        case Expr::Kind::CellReference:
            out += render_ref(e.ref, o);
            return;
        case Expr::Kind::RangeReference:
            out += render_range_expr(e.range, o);
            return;
        case Expr::Kind::NameReference:
            out += e.text;
            return;
        case Expr::Kind::Unary: {
            int p = expr_precedence(e);
            bool parens = expr_precedence(e.args[0]) < p;
            if (e.un_op == UnOp::Percent) {
                child(e.args[0], parens);
                out += '%';
            } else {
                out += (e.un_op == UnOp::Neg) ? '-' : '+';
                child(e.args[0], parens);
            }
            return;
        }
        case Expr::Kind::Binary: {
            int p = expr_precedence(e);
            child(e.args[0], expr_precedence(e.args[0]) < p);
            out += bin_op_text(e.bin_op);
            child(e.args[1], expr_precedence(e.args[1]) <= p);
            return;
        }
        case Expr::Kind::Call: {
            out += e.text;
            out += '(';
            for (size_t i = 0; i < e.args.size(); ++i) {
                if (i) out += ',';
                render_expr(e.args[i], o, out);
            }
            out += ')';
            return;
        }
    }
}

}  // namespace detail

/// Renders an AST back to "=..." source with minimal parentheses. R1C1 style
/// requires a valid origin.
inline std::string render(const FormulaAst& ast, RefStyle style = RefStyle::A1,
                          const CellRef& origin = CellRef{}) {
    if (style == RefStyle::R1C1 && !origin.in_bounds())
        throw std::invalid_argument("R1C1 rendering requires a valid origin");
    detail::RenderOpts o;
    o.style = style;
    o.origin = origin;
    std::string out = "=";
    detail::render_expr(ast, o, out);
    return out;
}

// ---------------------------------------------------------------------------
// Normalization (copy-invariant canonical form)
// ---------------------------------------------------------------------------

/// Canonical R1C1 text in which relative references are offsets from the
/// owning cell. Fill-copies of one formula normalize identically.
struct NormalizedFormula {
    std::string text;
    friend bool operator==(const NormalizedFormula&, const NormalizedFormula&) = default;
    friend bool operator<(const NormalizedFormula& a, const NormalizedFormula& b) {
        return a.text < b.text;
    }
};

inline NormalizedFormula normalize_r1c1(const FormulaAst& ast, const CellRef& origin) {
    if (!origin.in_bounds())
        throw std::invalid_argument("normalization requires a valid origin");
    detail::RenderOpts o;
    o.style = RefStyle::R1C1;
    o.origin = origin;
    o.uppercase_sheets = true;
    std::string out = "=";
    detail::render_expr(ast, o, out);
    return NormalizedFormula{std::move(out)};
}

/// Rebuilds an A1-style AST from a normalized formula at `origin`.
inline FormulaAst denormalize_r1c1(const NormalizedFormula& nf, const CellRef& origin) {
    return parse_formula_r1c1(nf.text, origin);
}

/// Shifts every relative reference component by (delta_row, delta_col);
/// absolute components are left fixed. The caller keeps results in bounds.
inline FormulaAst shift_relative_refs(FormulaAst ast, int delta_row, int delta_col) {
    auto shift_cell = [&](CellRef& r) {
        if (!r.row_abs) r.row += delta_row;
        if (!r.col_abs) r.col += delta_col;
    };
    switch (ast.kind) {
        case Expr::Kind::CellReference:
            shift_cell(ast.ref);
            break;
        case Expr::Kind::RangeReference:
            shift_cell(ast.range.start);
            shift_cell(ast.range.end);
            break;
        default:
            for (Expr& a : ast.args) a = shift_relative_refs(std::move(a), delta_row, delta_col);
            break;
    }
    return ast;
}

// ---------------------------------------------------------------------------
// Reference extraction
// ---------------------------------------------------------------------------

/// One reference occurrence inside a formula, resolved against a workbook.
/// Dangling targets are returned as data, never dropped.
struct RefUse {
    enum class Kind { Cell, Range, DanglingSheet, DanglingName };
    Kind kind = Kind::Cell;
    RangeRef target;        // resolved target (single cell ranges for Kind::Cell)
    std::string raw;        // rendering of the occurrence as written
    std::string via_name;   // defined name this occurrence resolved through, if any
};

namespace detail {

inline void collect_refs_walk(const Expr& e, const CellRef& origin, const Workbook& wb,
                              std::vector<RefUse>& out) {
    switch (e.kind) {
        case Expr::Kind::CellReference:
        case Expr::Kind::RangeReference: {
            RangeRef r = e.kind == Expr::Kind::CellReference ? RangeRef::single(e.ref) : e.range;
            std::string sheet = r.start.sheet.empty() ? origin.sheet : r.start.sheet;
            RefUse use;
            use.raw = e.kind == Expr::Kind::CellReference
                          ? render_ref(e.ref, RenderOpts{})
                          : render_range_expr(e.range, RenderOpts{});
            if (wb.sheet_index(sheet) < 0) {
                use.kind = RefUse::Kind::DanglingSheet;
                r.start.sheet = sheet;
                r.end.sheet = sheet;
                use.target = r;
            } else {
                use.kind = e.kind == Expr::Kind::CellReference ? RefUse::Kind::Cell
                                                               : RefUse::Kind::Range;
                std::string canon = wb.canonical_sheet(sheet);
                r.start.sheet = canon;
                r.end.sheet = canon;
                use.target = r;
            }
            out.push_back(std::move(use));
            return;
        }
        case Expr::Kind::NameReference: {
            RefUse use;
            use.raw = e.text;
            use.via_name = e.text;
            try {
                use.target = resolve_name(wb, e.text);
                use.kind = use.target.is_single_cell() ? RefUse::Kind::Cell : RefUse::Kind::Range;
            } catch (const NameError&) {
                use.kind = RefUse::Kind::DanglingName;
            }
            out.push_back(std::move(use));
            return;
        }
        default:
            for (const Expr& a : e.args) collect_refs_walk(a, origin, wb, out);
            return;
    }
}

}  // namespace detail

/// Every Ref/Range/NameRef occurrence in tree order, once per occurrence.
inline std::vector<RefUse> collect_refs(const FormulaAst& ast, const CellRef& origin,
                                        const Workbook& wb) {
    std::vector<RefUse> out;
    detail::collect_refs_walk(ast, origin, wb, out);
    return out;
}

}  // namespace cellsentry
