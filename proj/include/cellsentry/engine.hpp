#pragma once

// Deterministic recalculation: topological evaluation of formula cells over
// the dependency graph, with explicit error-value propagation. Circular
// cells are valued #CIRC! and never iterated; circularity is a review
// finding, not a calculation mode.

#include <cassert>
#include <cmath>
#include <functional>
#include <map>

#include "cellsentry/findings.hpp"
#include "cellsentry/graph.hpp"

namespace cellsentry {

struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

struct Value {
    enum class Type { Blank, Number, Text, Bool, Error };

    Type type = Type::Blank;
    double num = 0.0;
    std::string text;
    bool boolean = false;
    ErrorCode err = ErrorCode::Value;

    static Value blank() { return Value{}; }
    static Value number(double v) {
        if (!std::isfinite(v)) return error(ErrorCode::Num);
        Value x;
        x.type = Type::Number;
        x.num = v;
        return x;
    }
    static Value str(std::string s) {
        Value x;
        x.type = Type::Text;
        x.text = std::move(s);
        return x;
    }
    static Value boolean_value(bool b) {
        Value x;
        x.type = Type::Bool;
        x.boolean = b;
        return x;
    }
    static Value error(ErrorCode c) {
        Value x;
        x.type = Type::Error;
        x.err = c;
        return x;
    }

    bool is_error() const { return type == Type::Error; }
    bool is_number() const { return type == Type::Number; }
    bool is_blank() const { return type == Type::Blank; }

    friend bool operator==(const Value& a, const Value& b) {
        if (a.type != b.type) return false;
        switch (a.type) {
            case Type::Blank: return true;
            case Type::Number: return a.num == b.num;
            case Type::Text: return a.text == b.text;
            case Type::Bool: return a.boolean == b.boolean;
            case Type::Error: return a.err == b.err;
        }
        return false;
    }
};

inline std::string render_value(const Value& v) {
    switch (v.type) {
        case Value::Type::Blank: return "";
        case Value::Type::Number: return render_number(v.num);
        case Value::Type::Text: return v.text;
        case Value::Type::Bool: return v.boolean ? "TRUE" : "FALSE";
        case Value::Type::Error: return std::string(error_code_text(v.err));
    }
    return "";
}

inline json value_to_json(const Value& v) {
    switch (v.type) {
        case Value::Type::Blank: return nullptr;
        case Value::Type::Number: return v.num;
        case Value::Type::Text: return v.text;
        case Value::Type::Bool: return v.boolean;
        case Value::Type::Error: return std::string(error_code_text(v.err));
    }
    return nullptr;
}

/// Literal cell content as an engine value.
inline Value literal_cell_value(const Cell& cell) {
    switch (cell.kind) {
        case Cell::Kind::Blank: return Value::blank();
        case Cell::Kind::Label: return Value::str(cell.text);
        case Cell::Kind::Number: return Value::number(cell.number);
        case Cell::Kind::Bool: return Value::boolean_value(cell.boolean);
        case Cell::Kind::ErrorLiteral: return Value::error(cell.error);
        case Cell::Kind::Formula: return Value::blank();  // caller handles formulas
    }
    return Value::blank();
}

// ---------------------------------------------------------------------------
// Coercions. Stricter than Excel by design: numeric text never coerces.
// ---------------------------------------------------------------------------

namespace detail {

inline Value to_number_value(const Value& v) {
    switch (v.type) {
        case Value::Type::Number: return v;
        case Value::Type::Bool: return Value::number(v.boolean ? 1.0 : 0.0);
        case Value::Type::Blank: return Value::number(0.0);
        case Value::Type::Error: return v;
        case Value::Type::Text: return Value::error(ErrorCode::Value);
    }
    return Value::error(ErrorCode::Value);
}

inline Value to_bool_value(const Value& v) {
    switch (v.type) {
        case Value::Type::Bool: return v;
        case Value::Type::Number: return Value::boolean_value(v.num != 0.0);
        case Value::Type::Blank: return Value::boolean_value(false);
        case Value::Type::Error: return v;
        case Value::Type::Text: return Value::error(ErrorCode::Value);
    }
    return Value::error(ErrorCode::Value);
}

inline std::string to_text(const Value& v) { return render_value(v); }

/// Three-way comparison with Excel's cross-type ordering Number < Text < Bool.
/// Text compares ASCII case-insensitively. Blank coerces to the other side's
/// neutral element.
inline int compare_values(const Value& a, const Value& b) {
    Value x = a, y = b;
    if (x.is_blank() && y.is_blank()) return 0;
    if (x.is_blank()) {
        if (y.type == Value::Type::Number) x = Value::number(0.0);
        else if (y.type == Value::Type::Text) x = Value::str("");
        else x = Value::boolean_value(false);
    }
    if (y.is_blank()) {
        if (x.type == Value::Type::Number) y = Value::number(0.0);
        else if (x.type == Value::Type::Text) y = Value::str("");
        else y = Value::boolean_value(false);
    }
    auto rank = [](const Value& v) {
        return v.type == Value::Type::Number ? 0 : v.type == Value::Type::Text ? 1 : 2;
    };
    if (rank(x) != rank(y)) return rank(x) < rank(y) ? -1 : 1;
    switch (x.type) {
        case Value::Type::Number:
            return x.num < y.num ? -1 : x.num > y.num ? 1 : 0;
        case Value::Type::Text: {
            std::string lx = lower_copy(x.text), ly = lower_copy(y.text);
            return lx < ly ? -1 : lx > ly ? 1 : 0;
        }
        default:
            return x.boolean == y.boolean ? 0 : (!x.boolean ? -1 : 1);
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Decimal rounding (half away from zero over the shortest decimal form)
// ---------------------------------------------------------------------------

enum class RoundMode { HalfAwayFromZero, AwayFromZero, TowardZero };

/// Rounds at `digits` decimal places (negative rounds left of the point) by
/// string manipulation of the value's shortest round-trip decimal form, so
/// ROUND(2.675, 2) = 2.68 as a spreadsheet author expects.
inline double decimal_round(double x, int digits, RoundMode mode) {
    if (x == 0.0 || !std::isfinite(x)) return x == 0.0 ? 0.0 : x;
    if (digits > 320) return x;
    if (digits < -320) return 0.0;

    bool negative = x < 0;
    std::string repr = render_number(std::abs(x));

    // Split shortest form into digit string + decimal exponent.
    std::string digits_str;
    int exp10 = 0;
    size_t epos = repr.find_first_of("eE");
    std::string mantissa = epos == std::string::npos ? repr : repr.substr(0, epos);
    if (epos != std::string::npos) exp10 = std::atoi(repr.c_str() + epos + 1);
    size_t dot = mantissa.find('.');
    if (dot == std::string::npos) {
        digits_str = mantissa;
    } else {
        digits_str = mantissa.substr(0, dot) + mantissa.substr(dot + 1);
        exp10 -= static_cast<int>(mantissa.size() - dot - 1);
    }
    while (digits_str.size() > 1 && digits_str.front() == '0') digits_str.erase(digits_str.begin());
    // Value = digits_str * 10^exp10. Keep everything down to 10^(-digits).
    long long keep = static_cast<long long>(digits_str.size()) + exp10 + digits;
    if (keep >= static_cast<long long>(digits_str.size())) return x;

    bool bump = false;
    if (keep < 0) {
        bump = false;  // magnitude far below the rounding unit
        if (mode == RoundMode::AwayFromZero) bump = true;
        digits_str.clear();
    } else {
        std::string rest = digits_str.substr(static_cast<size_t>(keep));
        digits_str.resize(static_cast<size_t>(keep));
        bool rest_nonzero = rest.find_first_not_of('0') != std::string::npos;
        switch (mode) {
            case RoundMode::HalfAwayFromZero: bump = !rest.empty() && rest[0] >= '5'; break;
            case RoundMode::AwayFromZero: bump = rest_nonzero; break;
            case RoundMode::TowardZero: bump = false; break;
        }
    }
    if (bump) {
        int i = static_cast<int>(digits_str.size()) - 1;
        for (; i >= 0; --i) {
            if (digits_str[i] == '9') {
                digits_str[i] = '0';
            } else {
                ++digits_str[i];
                break;
            }
        }
        if (i < 0) digits_str.insert(digits_str.begin(), '1');
    }
    if (digits_str.empty() || digits_str.find_first_not_of('0') == std::string::npos) return 0.0;

    std::string out = (negative ? "-" : "") + digits_str + "e" + std::to_string(-digits);
    return std::strtod(out.c_str(), nullptr);
}

// ---------------------------------------------------------------------------
// Evaluation environment
// ---------------------------------------------------------------------------

/// Cell-value lookup the evaluator runs against. `cell_value` must be total
/// over the referenced cells; the workbook supplies name resolution and
/// sparse range iteration.
struct EvalEnv {
    const Workbook* wb = nullptr;
    std::function<Value(const CellRef&)> cell_value;

    Value at(const std::string& sheet, int col, int row) const {
        return cell_value(CellRef{sheet, col, row, false, false});
    }
};

namespace detail {

/// Operand of a function call: a scalar value or an unmaterialized range.
struct Operand {
    bool is_range = false;
    Value scalar;
    RangeRef range;
};

inline Value range_member(const EvalEnv& env, const RangeRef& r, int row_off, int col_off) {
    return env.at(r.start.sheet, r.start.col + col_off, r.start.row + row_off);
}

/// Applies fn to every non-blank member value of the range, in row-major
/// order. Returns an error value if fn propagates one, else blank.
template <typename Fn>
inline Value for_each_member(const EvalEnv& env, const RangeRef& r, Fn&& fn) {
    for (int row = r.start.row; row <= r.end.row; ++row)
        for (int col = r.start.col; col <= r.end.col; ++col) {
            Value v = env.at(r.start.sheet, col, row);
            if (v.is_blank()) continue;
            if (Value e = fn(v); e.is_error()) return e;
        }
    return Value::blank();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Formula evaluation
// ---------------------------------------------------------------------------

namespace detail {

class Evaluator {
public:
    Evaluator(const EvalEnv& env, const CellRef& origin) : env_(env), origin_(origin) {}

    Value eval(const Expr& e) {
        Operand op = eval_operand(e);
        if (op.is_range) return Value::error(ErrorCode::Value);  // no implicit intersection
        return op.scalar;
    }

private:
    Operand scalar(Value v) {
        Operand op;
        op.scalar = std::move(v);
        return op;
    }

    Operand eval_operand(const Expr& e) {
        switch (e.kind) {
            case Expr::Kind::Number: return scalar(Value::number(e.number));
            case Expr::Kind::Text: return scalar(Value::str(e.text));
            case Expr::Kind::Bool: return scalar(Value::boolean_value(e.boolean));
            case Expr::Kind::Error: return scalar(Value::error(e.error));
            case Expr::Kind::CellReference: {
                CellRef ref = e.ref;
                if (ref.sheet.empty()) ref.sheet = origin_.sheet;
                if (!env_.wb || env_.wb->sheet_index(ref.sheet) < 0)
                    return scalar(Value::error(ErrorCode::Ref));
                return scalar(env_.cell_value(ref));
            }
            case Expr::Kind::RangeReference: {
                RangeRef r = e.range;
                if (r.start.sheet.empty()) {
                    r.start.sheet = origin_.sheet;
                    r.end.sheet = origin_.sheet;
                }
                if (!env_.wb || env_.wb->sheet_index(r.start.sheet) < 0)
                    return scalar(Value::error(ErrorCode::Ref));
                Operand op;
                op.is_range = true;
                op.range = r;
                return op;
            }
            case Expr::Kind::NameReference: {
                if (!env_.wb) return scalar(Value::error(ErrorCode::Name));
                RangeRef r;
                try {
                    r = resolve_name(*env_.wb, e.text);
                } catch (const NameError&) {
                    return scalar(Value::error(ErrorCode::Name));
                }
                if (r.is_single_cell()) return scalar(env_.cell_value(r.start));
                Operand op;
                op.is_range = true;
                op.range = r;
                return op;
            }
            case Expr::Kind::Unary: {
                Value v = eval(e.args[0]);
                if (e.un_op == UnOp::Plus) return scalar(v);  // pass-through
                Value n = to_number_value(v);
                if (n.is_error()) return scalar(n);
                return scalar(e.un_op == UnOp::Neg ? Value::number(-n.num)
                                                   : Value::number(n.num / 100.0));
            }
            case Expr::Kind::Binary: return scalar(eval_binary(e));
            case Expr::Kind::Call: return scalar(eval_call(e));
        }
        return scalar(Value::error(ErrorCode::Value));
    }

    Value eval_binary(const Expr& e) {
        Value l = eval(e.args[0]);
        if (l.is_error()) return l;  // first error in argument order wins
        Value r = eval(e.args[1]);

        switch (e.bin_op) {
            case BinOp::Add: case BinOp::Sub: case BinOp::Mul:
            case BinOp::Div: case BinOp::Pow: {
                Value ln = to_number_value(l);
                if (ln.is_error()) return ln;
                Value rn = to_number_value(r);
                if (rn.is_error()) return rn;
                switch (e.bin_op) {
                    case BinOp::Add: return Value::number(ln.num + rn.num);
                    case BinOp::Sub: return Value::number(ln.num - rn.num);
                    case BinOp::Mul: return Value::number(ln.num * rn.num);
                    case BinOp::Div:
                        if (rn.num == 0.0) return Value::error(ErrorCode::Div0);
                        return Value::number(ln.num / rn.num);
                    default:
                        return Value::number(std::pow(ln.num, rn.num));
                }
            }
            case BinOp::Concat: {
                if (r.is_error()) return r;
                return Value::str(to_text(l) + to_text(r));
            }
            default: {
                if (r.is_error()) return r;
                int c = compare_values(l, r);
                switch (e.bin_op) {
                    case BinOp::Eq: return Value::boolean_value(c == 0);
                    case BinOp::Ne: return Value::boolean_value(c != 0);
                    case BinOp::Lt: return Value::boolean_value(c < 0);
                    case BinOp::Le: return Value::boolean_value(c <= 0);
                    case BinOp::Gt: return Value::boolean_value(c > 0);
                    case BinOp::Ge: return Value::boolean_value(c >= 0);
                    default: return Value::error(ErrorCode::Value);
                }
            }
        }
    }

    // -- function library ---------------------------------------------------

    Value eval_call(const Expr& e) {
        const std::string& fn = e.text;
        if (fn == "IF") return fn_if(e);
        std::vector<Operand> args;
        args.reserve(e.args.size());
        for (const Expr& a : e.args) args.push_back(eval_operand(a));

        if (fn == "SUM" || fn == "MIN" || fn == "MAX" || fn == "AVERAGE" || fn == "COUNT" ||
            fn == "COUNTA")
            return fn_aggregate(fn, args);
        if (fn == "AND" || fn == "OR") return fn_and_or(fn == "AND", args);
        if (fn == "NOT") return fn_not(args);
        if (fn == "ABS") return fn_abs(args);
        if (fn == "ROUND") return fn_round(args, RoundMode::HalfAwayFromZero);
        if (fn == "ROUNDUP") return fn_round(args, RoundMode::AwayFromZero);
        if (fn == "ROUNDDOWN") return fn_round(args, RoundMode::TowardZero);
        if (fn == "INDEX") return fn_index(args);
        if (fn == "MATCH") return fn_match(args);
        if (fn == "VLOOKUP") return fn_vlookup(args);
        if (fn == "NPV") return fn_npv(args);
        if (fn == "IRR") return fn_irr(args);
        return Value::error(ErrorCode::Name);
    }

    Value fn_if(const Expr& e) {
        if (e.args.size() < 2 || e.args.size() > 3) return Value::error(ErrorCode::Value);
        Value cond = to_bool_value(eval(e.args[0]));
        if (cond.is_error()) return cond;
        if (cond.boolean) return eval(e.args[1]);  // alternative branch stays unevaluated
        if (e.args.size() == 3) return eval(e.args[2]);
        return Value::boolean_value(false);
    }

    Value fn_aggregate(const std::string& fn, const std::vector<Operand>& args) {
        if (args.empty()) return Value::error(ErrorCode::Value);
        double sum = 0.0;
        size_t count = 0, non_blank = 0;
        bool has = false;
        double mn = 0.0, mx = 0.0;
        auto feed_number = [&](double v) {
            sum += v;
            ++count;
            if (!has) { mn = mx = v; has = true; }
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        };
        for (const Operand& a : args) {
            if (a.is_range) {
                Value err = for_each_member(env_, a.range, [&](const Value& v) {
                    if (v.is_error()) return v;
                    ++non_blank;
                    if (v.is_number()) feed_number(v.num);
                    return Value::blank();  // text and bool members are ignored
                });
                if (err.is_error()) return err;
            } else {
                const Value& v = a.scalar;
                if (v.is_error()) return v;
                if (v.is_blank()) continue;  // blanks ignored by aggregators
                ++non_blank;
                if (fn == "COUNT") {
                    if (v.is_number()) ++count;
                    continue;
                }
                if (fn == "COUNTA") continue;
                Value n = to_number_value(v);
                if (n.is_error()) return n;
                feed_number(n.num);
            }
        }
        if (fn == "SUM") return Value::number(sum);
        if (fn == "COUNT") return Value::number(static_cast<double>(count));
        if (fn == "COUNTA") return Value::number(static_cast<double>(non_blank));
        if (fn == "AVERAGE")
            return count == 0 ? Value::error(ErrorCode::Div0) : Value::number(sum / count);
        if (fn == "MIN") return Value::number(has ? mn : 0.0);
        return Value::number(has ? mx : 0.0);
    }

    Value fn_and_or(bool is_and, const std::vector<Operand>& args) {
        if (args.empty()) return Value::error(ErrorCode::Value);
        bool acc = is_and;
        bool saw_logical = false;
        for (const Operand& a : args) {
            if (a.is_range) {
                Value err = for_each_member(env_, a.range, [&](const Value& v) {
                    if (v.is_error()) return v;
                    if (v.type == Value::Type::Bool || v.is_number()) {
                        bool b = v.type == Value::Type::Bool ? v.boolean : v.num != 0.0;
                        saw_logical = true;
                        acc = is_and ? (acc && b) : (acc || b);
                    }
                    return Value::blank();
                });
                if (err.is_error()) return err;
            } else {
                Value b = to_bool_value(a.scalar);
                if (b.is_error()) return b;
                saw_logical = true;
                acc = is_and ? (acc && b.boolean) : (acc || b.boolean);
            }
        }
        if (!saw_logical) return Value::error(ErrorCode::Value);
        return Value::boolean_value(acc);
    }

    Value fn_not(const std::vector<Operand>& args) {
        if (args.size() != 1 || args[0].is_range) return Value::error(ErrorCode::Value);
        Value b = to_bool_value(args[0].scalar);
        if (b.is_error()) return b;
        return Value::boolean_value(!b.boolean);
    }

    Value fn_abs(const std::vector<Operand>& args) {
        if (args.size() != 1 || args[0].is_range) return Value::error(ErrorCode::Value);
        Value n = to_number_value(args[0].scalar);
        if (n.is_error()) return n;
        return Value::number(std::abs(n.num));
    }

    Value fn_round(const std::vector<Operand>& args, RoundMode mode) {
        if (args.size() != 2 || args[0].is_range || args[1].is_range)
            return Value::error(ErrorCode::Value);
        Value x = to_number_value(args[0].scalar);
        if (x.is_error()) return x;
        Value n = to_number_value(args[1].scalar);
        if (n.is_error()) return n;
        int digits = static_cast<int>(std::trunc(std::clamp(n.num, -1000.0, 1000.0)));
        return Value::number(decimal_round(x.num, digits, mode));
    }

    std::optional<long> operand_int(const Operand& a, Value& err_out) {
        if (a.is_range) {
            err_out = Value::error(ErrorCode::Value);
            return std::nullopt;
        }
        Value n = to_number_value(a.scalar);
        if (n.is_error()) {
            err_out = n;
            return std::nullopt;
        }
        return static_cast<long>(std::trunc(n.num));
    }

    Value fn_index(const std::vector<Operand>& args) {
        if (args.size() < 2 || args.size() > 3 || !args[0].is_range)
            return Value::error(ErrorCode::Value);
        const RangeRef& r = args[0].range;
        Value err;
        auto first = operand_int(args[1], err);
        if (!first) return err;
        long row = *first, col = 1;
        if (args.size() == 3) {
            auto second = operand_int(args[2], err);
            if (!second) return err;
            col = *second;
        } else if (r.height() == 1 && r.width() > 1) {
            col = row;  // single-row vector: the lone index walks columns
            row = 1;
        }
        if (row < 1 || col < 1) return Value::error(ErrorCode::Value);
        if (row > r.height() || col > r.width()) return Value::error(ErrorCode::Ref);
        return range_member(env_, r, static_cast<int>(row) - 1, static_cast<int>(col) - 1);
    }

    Value fn_match(const std::vector<Operand>& args) {
        if (args.size() < 2 || args.size() > 3) return Value::error(ErrorCode::Value);
        if (args[0].is_range || !args[1].is_range) return Value::error(ErrorCode::Value);
        const Value& needle = args[0].scalar;
        if (needle.is_error()) return needle;
        long match_type = 1;
        if (args.size() == 3) {
            Value err;
            auto t = operand_int(args[2], err);
            if (!t) return err;
            match_type = *t;
        }
        if (match_type != 0 && match_type != 1) return Value::error(ErrorCode::Value);
        const RangeRef& r = args[1].range;
        bool vertical = r.width() == 1;
        if (!vertical && r.height() != 1) return Value::error(ErrorCode::NA);
        int length = vertical ? r.height() : r.width();

        int best = -1;
        for (int i = 0; i < length; ++i) {
            Value v = vertical ? range_member(env_, r, i, 0) : range_member(env_, r, 0, i);
            if (v.is_error()) return v;
            if (v.type != needle.type) continue;
            int c = compare_values(v, needle);
            if (match_type == 0) {
                if (c == 0) return Value::number(i + 1);
            } else if (c <= 0) {
                best = i;  // ascending order assumed; deterministic scan otherwise
            }
        }
        if (match_type == 1 && best >= 0) return Value::number(best + 1);
        return Value::error(ErrorCode::NA);
    }

    Value fn_vlookup(const std::vector<Operand>& args) {
        if (args.size() < 3 || args.size() > 4) return Value::error(ErrorCode::Value);
        if (args[0].is_range || !args[1].is_range) return Value::error(ErrorCode::Value);
        const Value& needle = args[0].scalar;
        if (needle.is_error()) return needle;
        Value err;
        auto col = operand_int(args[2], err);
        if (!col) return err;
        const RangeRef& r = args[1].range;
        if (*col < 1) return Value::error(ErrorCode::Value);
        if (*col > r.width()) return Value::error(ErrorCode::Ref);
        bool approximate = true;
        if (args.size() == 4) {
            if (args[3].is_range) return Value::error(ErrorCode::Value);
            Value b = to_bool_value(args[3].scalar);
            if (b.is_error()) return b;
            approximate = b.boolean;
        }
        int best = -1;
        for (int i = 0; i < r.height(); ++i) {
            Value key = range_member(env_, r, i, 0);
            if (key.is_error()) return key;
            if (key.type != needle.type) continue;
            int c = compare_values(key, needle);
            if (!approximate) {
                if (c == 0) { best = i; break; }
            } else if (c <= 0) {
                best = i;  // largest key <= needle under ascending order
            }
        }
        if (best < 0) return Value::error(ErrorCode::NA);
        return range_member(env_, r, best, static_cast<int>(*col) - 1);
    }

    Value fn_npv(const std::vector<Operand>& args) {
        if (args.size() < 2) return Value::error(ErrorCode::Value);
        if (args[0].is_range) return Value::error(ErrorCode::Value);
        Value rate = to_number_value(args[0].scalar);
        if (rate.is_error()) return rate;
        if (1.0 + rate.num == 0.0) return Value::error(ErrorCode::Div0);
        double acc = 0.0;
        double discount = 1.0;
        for (size_t i = 1; i < args.size(); ++i) {
            const Operand& a = args[i];
            if (a.is_range) {
                Value err = for_each_member(env_, a.range, [&](const Value& v) {
                    if (v.is_error()) return v;
                    if (v.is_number()) {
                        discount *= 1.0 + rate.num;
                        acc += v.num / discount;
                    }
                    return Value::blank();
                });
                if (err.is_error()) return err;
            } else {
                const Value& v = a.scalar;
                if (v.is_error()) return v;
                if (v.is_blank()) continue;
                Value n = to_number_value(v);
                if (n.is_error()) return n;
                discount *= 1.0 + rate.num;
                acc += n.num / discount;
            }
        }
        return Value::number(acc);
    }

    Value fn_irr(const std::vector<Operand>& args) {
        if (args.empty() || args.size() > 2 || !args[0].is_range)
            return Value::error(ErrorCode::Value);
        double guess = 0.1;
        if (args.size() == 2) {
            Value g = to_number_value(args[1].is_range ? Value::error(ErrorCode::Value)
                                                       : args[1].scalar);
            if (g.is_error()) return g;
            guess = g.num;
        }
        std::vector<double> flows;
        Value err = for_each_member(env_, args[0].range, [&](const Value& v) {
            if (v.is_error()) return v;
            if (v.is_number()) flows.push_back(v.num);
            return Value::blank();
        });
        if (err.is_error()) return err;
        bool pos = false, neg = false;
        for (double f : flows) {
            if (f > 0) pos = true;
            if (f < 0) neg = true;
        }
        if (flows.size() < 2 || !pos || !neg) return Value::error(ErrorCode::Num);

        auto npv_at = [&](double r) {
            double acc = 0.0, d = 1.0;
            for (size_t i = 0; i < flows.size(); ++i) {
                acc += flows[i] / d;
                d *= 1.0 + r;
            }
            return acc;
        };
        auto npv_grad = [&](double r) {
            double acc = 0.0;
            for (size_t i = 1; i < flows.size(); ++i)
                acc -= static_cast<double>(i) * flows[i] / std::pow(1.0 + r, i + 1);
            return acc;
        };

        // Newton first, bisection fallback per the documented contract.
        double r = guess;
        for (int it = 0; it < 100 && r > -1.0; ++it) {
            double f = npv_at(r);
            if (std::abs(f) < 1e-9) return Value::number(r);
            double d = npv_grad(r);
            if (d == 0.0 || !std::isfinite(d)) break;
            double next = r - f / d;
            if (!std::isfinite(next)) break;
            r = next;
        }
        double lo = -0.9999, hi = 10.0;
        double flo = npv_at(lo), fhi = npv_at(hi);
        if (!(flo == 0.0) && !(fhi == 0.0) && (flo > 0) == (fhi > 0))
            return Value::error(ErrorCode::Num);
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            double fm = npv_at(mid);
            if (std::abs(fm) < 1e-9 || hi - lo < 1e-14) return Value::number(mid);
            if ((fm > 0) == (flo > 0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        double mid = 0.5 * (lo + hi);
        return std::abs(npv_at(mid)) < 1e-9 ? Value::number(mid) : Value::error(ErrorCode::Num);
    }

    const EvalEnv& env_;
    CellRef origin_;
};

}  // namespace detail

/// Evaluates one formula AST against a cell-value environment. Never throws
/// for data problems; they surface as error values.
inline Value eval_formula(const FormulaAst& ast, const CellRef& origin, const EvalEnv& env) {
    detail::Evaluator ev(env, origin);
    return ev.eval(ast);
}

// ---------------------------------------------------------------------------
// Recalculation
// ---------------------------------------------------------------------------

struct RecalcResult {
    /// Value per non-blank cell (plus overridden blanks), keyed by position.
    std::map<CellRef, Value, PositionLess> values;
    std::vector<CellRef> evaluation_order;  // formula cells, topological
    std::vector<CellRef> cells_in_error;
    std::vector<CellRef> cycle_cells;

    Value value_at(const CellRef& ref) const {
        auto it = values.find(ref);
        return it == values.end() ? Value::blank() : it->second;
    }
};

using OverrideMap = std::map<CellRef, Value, PositionLess>;

inline RecalcResult recalculate_with_graph(const Workbook& wb, const DepGraph& g,
                                           const OverrideMap& overrides = {}) {
    for (const auto& [ref, value] : overrides) {
        const Sheet* s = wb.find_sheet(ref.sheet);
        if (!s) throw EngineError("override target sheet '" + ref.sheet + "' does not exist");
        if (!ref.in_bounds()) throw EngineError("override target out of bounds: " + render_a1(ref));
        if (s->cell_at(ref.col, ref.row).is_formula())
            throw EngineError("override would silently replace formula cell " + render_a1(ref));
    }

    RecalcResult result;
    const int n = static_cast<int>(g.nodes.size());
    std::vector<Value> computed(n);
    std::vector<bool> resolved(n, false);

    auto override_for = [&](const CellRef& ref) -> const Value* {
        auto it = overrides.find(ref);
        return it == overrides.end() ? nullptr : &it->second;
    };

    // Literal cells, overrides and defective formulas resolve immediately.
    for (int i = 0; i < n; ++i) {
        const auto& node = g.nodes[i];
        CellRef ref = g.ref_of(i);
        if (const Value* ov = override_for(ref)) {
            computed[i] = *ov;
            resolved[i] = true;
            continue;
        }
        if (!node.is_formula) {
            computed[i] = literal_cell_value(wb.cell(ref));
            resolved[i] = true;
        } else if (node.defective) {
            computed[i] = Value::error(ErrorCode::Value);
            resolved[i] = true;
        }
    }

    // Cycle members are valued #CIRC! without evaluation.
    for (const auto& cycle : find_circularity(g))
        for (const CellRef& ref : cycle) {
            int id = g.find_node(ref);
            if (id >= 0 && !resolved[id]) {
                computed[id] = Value::error(ErrorCode::Circ);
                resolved[id] = true;
                result.cycle_cells.push_back(ref);
            }
        }

    // Kahn's algorithm over the remaining formula cells, smallest node id
    // first so evaluation order is reproducible. Formulas over cap-summarized
    // ranges are deferred until the regular topological order drains, since
    // their member edges are not individually present.
    std::set<int> deferred;
    for (const auto& [owner, range] : g.capped_ranges)
        if (!resolved[owner]) deferred.insert(owner);

    std::vector<int> pending(n, 0);
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int i = 0; i < n; ++i) {
        if (resolved[i]) continue;
        int count = 0;
        for (int p : g.in_edges[i])
            if (!resolved[p]) ++count;
        pending[i] = count;
        if (count == 0 && !deferred.count(i)) ready.push(i);
    }

    EvalEnv env;
    env.wb = &wb;
    env.cell_value = [&](const CellRef& ref) -> Value {
        if (const Value* ov = override_for(ref)) return *ov;
        int id = g.find_node(ref);
        if (id < 0) {
            const Sheet* s = wb.find_sheet(ref.sheet);
            if (!s || !ref.in_bounds()) return Value::error(ErrorCode::Ref);
            return literal_cell_value(s->cell_at(ref.col, ref.row));
        }
        assert(resolved[id] && "evaluation order must respect dependency edges");
        return computed[id];
    };

    auto evaluate_node = [&](int id) {
        CellRef origin = g.ref_of(id);
        computed[id] = eval_formula(*g.asts[id], origin, env);
        resolved[id] = true;
        result.evaluation_order.push_back(origin);
        for (int dep : g.out_edges[id]) {
            if (resolved[dep]) continue;
            if (--pending[dep] == 0 && !deferred.count(dep)) ready.push(dep);
        }
    };

    while (true) {
        while (!ready.empty()) {
            int id = ready.top();
            ready.pop();
            evaluate_node(id);
        }
        auto it = std::find_if(deferred.begin(), deferred.end(),
                               [&](int id) { return !resolved[id]; });
        if (it == deferred.end()) break;
        evaluate_node(*it);
    }

    for (int i = 0; i < n; ++i) {
        if (g.nodes[i].value_source && !override_for(g.ref_of(i))) continue;
        result.values[g.ref_of(i)] = computed[i];
    }
    for (const auto& [ref, value] : overrides) result.values[ref] = value;
    for (const auto& [ref, value] : result.values)
        if (value.is_error()) result.cells_in_error.push_back(ref);
    return result;
}

/// Full recalculation. Override targets must be literal (non-formula) cells;
/// silently replacing a formula is refused as an audit hazard.
inline RecalcResult recalculate(const Workbook& wb, const OverrideMap& overrides = {}) {
    DepGraph g = build_graph(wb);
    return recalculate_with_graph(wb, g, overrides);
}

// ---------------------------------------------------------------------------
// Cached-value verification (rule R040)
// ---------------------------------------------------------------------------

/// Flags every formula cell whose author-recorded cached value disagrees with
/// the recalculated value: stale results betray broken links or manual edits.
inline std::vector<Finding> verify_cached_values(const Workbook& wb, const RecalcResult& result,
                                                 double tolerance = 1e-9) {
    std::vector<Finding> findings;
    for (const auto& sheet : wb.sheets) {
        for (const auto& [pos, cell] : sheet.cells) {
            if (!cell.is_formula() || !cell.cached) continue;
            CellRef ref{sheet.name, pos.col, pos.row, false, false};
            Value actual = result.value_at(ref);
            bool match = false;
            if (std::holds_alternative<double>(*cell.cached)) {
                match = actual.is_number() &&
                        std::abs(actual.num - std::get<double>(*cell.cached)) <= tolerance;
            } else if (std::holds_alternative<std::string>(*cell.cached)) {
                const std::string& s = std::get<std::string>(*cell.cached);
                match = (actual.type == Value::Type::Text && actual.text == s) ||
                        (actual.is_error() && s == std::string(error_code_text(actual.err)));
            } else {
                match = actual.type == Value::Type::Bool &&
                        actual.boolean == std::get<bool>(*cell.cached);
            }
            if (!match) {
                Finding f;
                f.rule_code = "R040";
                f.severity = Severity::Warning;
                f.locations = {render_a1(ref)};
                std::string cached_text =
                    std::holds_alternative<double>(*cell.cached)
                        ? render_number(std::get<double>(*cell.cached))
                        : std::holds_alternative<std::string>(*cell.cached)
                              ? std::get<std::string>(*cell.cached)
                              : (std::get<bool>(*cell.cached) ? "TRUE" : "FALSE");
                f.message = "cached value " + cached_text + " disagrees with recalculated value " +
                            render_value(actual);
                findings.push_back(std::move(f));
            }
        }
    }
    return findings;
}

}  // namespace cellsentry
