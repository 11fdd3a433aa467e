#pragma once

// Cell and range addressing: A1 coordinates, absolute/relative fixity,
// sheet qualification and the quoting rules for sheet names.

#include <cctype>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cellsentry {

inline constexpr int kMaxCol = 16384;    // column XFD
inline constexpr int kMaxRow = 1048576;

namespace detail {

inline char ascii_upper(char c) {
    return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
}

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string upper_copy(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = ascii_upper(c);
    return out;
}

inline std::string lower_copy(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = ascii_lower(c);
    return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (ascii_upper(a[i]) != ascii_upper(b[i])) return false;
    return true;
}

inline bool is_ident_start(char c) {
    return c == '_' || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
}

inline bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9') || c == '.';
}

}  // namespace detail

/// 1-based column index -> letters ("A".."XFD").
inline std::string col_to_name(int col) {
    std::string s;
    while (col > 0) {
        int rem = (col - 1) % 26;
        s.insert(s.begin(), static_cast<char>('A' + rem));
        col = (col - 1) / 26;
    }
    return s;
}

/// Letters -> 1-based column index. Returns 0 on malformed input.
inline int col_from_name(std::string_view name) {
    if (name.empty() || name.size() > 3) return 0;
    long col = 0;
    for (char c : name) {
        char u = detail::ascii_upper(c);
        if (u < 'A' || u > 'Z') return 0;
        col = col * 26 + (u - 'A' + 1);
    }
    return static_cast<int>(col);
}

/// True when `text` is a plain in-bounds A1 address (optionally with $ markers).
inline bool is_a1_address(std::string_view text) {
    size_t i = 0;
    if (i < text.size() && text[i] == '$') ++i;
    size_t let = i;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    if (i == let || i - let > 3) return false;
    int col = col_from_name(text.substr(let, i - let));
    if (col < 1 || col > kMaxCol) return false;
    if (i < text.size() && text[i] == '$') ++i;
    size_t dig = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i != text.size() || dig == i) return false;
    if (i - dig > 7 || text[dig] == '0') return false;
    long row = 0;
    for (size_t k = dig; k < i; ++k) row = row * 10 + (text[k] - '0');
    return row >= 1 && row <= kMaxRow;
}

struct CellRef {
    std::string sheet;    // empty only inside unresolved parser output
    int col = 1;          // 1-based
    int row = 1;          // 1-based
    bool col_abs = false;
    bool row_abs = false;

    friend bool operator==(const CellRef& a, const CellRef& b) {
        return a.sheet == b.sheet && a.col == b.col && a.row == b.row &&
               a.col_abs == b.col_abs && a.row_abs == b.row_abs;
    }

    bool same_cell(const CellRef& other) const {
        return detail::iequals(sheet, other.sheet) && col == other.col && row == other.row;
    }

    bool in_bounds() const {
        return col >= 1 && col <= kMaxCol && row >= 1 && row <= kMaxRow;
    }
};

/// Sheet names that survive unquoted in a reference: identifier-shaped,
/// not mistakable for an A1 address or a boolean keyword.
inline bool sheet_needs_quotes(std::string_view name) {
    if (name.empty()) return true;
    if (!detail::is_ident_start(name[0])) return true;
    for (char c : name)
        if (!(detail::is_ident_start(c) || (c >= '0' && c <= '9'))) return true;
    if (is_a1_address(name)) return true;
    if (detail::iequals(name, "TRUE") || detail::iequals(name, "FALSE")) return true;
    return false;
}

/// Renders a sheet qualifier, single-quoting (with '' escapes) when required.
inline std::string render_sheet_prefix(std::string_view sheet) {
    if (!sheet_needs_quotes(sheet)) return std::string(sheet) + "!";
    std::string out = "'";
    for (char c : sheet) {
        out += c;
        if (c == '\'') out += '\'';
    }
    out += "'!";
    return out;
}

/// A1 text for the cell itself, no sheet qualifier.
inline std::string render_a1_local(const CellRef& ref) {
    std::string out;
    if (ref.col_abs) out += '$';
    out += col_to_name(ref.col);
    if (ref.row_abs) out += '$';
    out += std::to_string(ref.row);
    return out;
}

/// Fully qualified "Sheet!A1" text.
inline std::string render_a1(const CellRef& ref) {
    return render_sheet_prefix(ref.sheet) + render_a1_local(ref);
}

/// Parses a bare A1 component ("$AB$12") into coordinates. No sheet part.
inline std::optional<CellRef> parse_a1_local(std::string_view text) {
    if (!is_a1_address(text)) return std::nullopt;
    CellRef ref;
    size_t i = 0;
    if (text[i] == '$') { ref.col_abs = true; ++i; }
    size_t let = i;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    ref.col = col_from_name(text.substr(let, i - let));
    if (text[i] == '$') { ref.row_abs = true; ++i; }
    ref.row = 0;
    for (; i < text.size(); ++i) ref.row = ref.row * 10 + (text[i] - '0');
    return ref;
}

struct RangeRef {
    CellRef start;
    CellRef end;  // same sheet as start

    RangeRef() = default;
    RangeRef(CellRef a, CellRef b) {
        if (b.col < a.col) std::swap(a.col_abs, b.col_abs), std::swap(a.col, b.col);
        if (b.row < a.row) std::swap(a.row_abs, b.row_abs), std::swap(a.row, b.row);
        b.sheet = a.sheet;
        start = a;
        end = b;
    }
    static RangeRef single(CellRef c) { return RangeRef(c, c); }

    int width() const { return end.col - start.col + 1; }
    int height() const { return end.row - start.row + 1; }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool is_single_cell() const { return width() == 1 && height() == 1; }

    bool contains(const CellRef& c) const {
        return detail::iequals(c.sheet, start.sheet) &&
               c.col >= start.col && c.col <= end.col &&
               c.row >= start.row && c.row <= end.row;
    }

    std::optional<RangeRef> intersect(const RangeRef& other) const {
        if (!detail::iequals(start.sheet, other.start.sheet)) return std::nullopt;
        int c1 = std::max(start.col, other.start.col);
        int c2 = std::min(end.col, other.end.col);
        int r1 = std::max(start.row, other.start.row);
        int r2 = std::min(end.row, other.end.row);
        if (c1 > c2 || r1 > r2) return std::nullopt;
        CellRef a{start.sheet, c1, r1, false, false};
        CellRef b{start.sheet, c2, r2, false, false};
        return RangeRef(a, b);
    }

    friend bool operator==(const RangeRef& a, const RangeRef& b) {
        return a.start == b.start && a.end == b.end;
    }
};

inline std::string render_range_local(const RangeRef& r) {
    if (r.is_single_cell() && r.start.col_abs == r.end.col_abs && r.start.row_abs == r.end.row_abs)
        return render_a1_local(r.start);
    return render_a1_local(r.start) + ":" + render_a1_local(r.end);
}

inline std::string render_range(const RangeRef& r) {
    return render_sheet_prefix(r.start.sheet) + render_range_local(r);
}

/// Parses "Sheet!A1", "'P&L'!A1:B2" or "A1:B2" (the latter only when
/// `default_sheet` is supplied). Used for name targets, schema bindings and
/// CLI arguments; formula parsing has its own lexer.
inline std::optional<RangeRef> parse_range_text(std::string_view text,
                                                std::string_view default_sheet = {}) {
    std::string sheet;
    size_t i = 0;
    if (!text.empty() && text[0] == '\'') {
        ++i;
        bool closed = false;
        while (i < text.size()) {
            if (text[i] == '\'') {
                if (i + 1 < text.size() && text[i + 1] == '\'') { sheet += '\''; i += 2; continue; }
                ++i;
                closed = true;
                break;
            }
            sheet += text[i++];
        }
        if (!closed || i >= text.size() || text[i] != '!' || sheet.empty()) return std::nullopt;
        ++i;
    } else {
        size_t bang = text.find('!');
        if (bang != std::string_view::npos) {
            sheet = std::string(text.substr(0, bang));
            if (sheet.empty()) return std::nullopt;
            i = bang + 1;
        }
    }
    if (sheet.empty()) {
        if (default_sheet.empty()) return std::nullopt;
        sheet = std::string(default_sheet);
    }
    std::string_view body = text.substr(i);
    size_t colon = body.find(':');
    std::optional<CellRef> a, b;
    if (colon == std::string_view::npos) {
        a = parse_a1_local(body);
        b = a;
    } else {
        a = parse_a1_local(body.substr(0, colon));
        b = parse_a1_local(body.substr(colon + 1));
    }
    if (!a || !b) return std::nullopt;
    a->sheet = sheet;
    b->sheet = sheet;
    return RangeRef(*a, *b);
}

/// Strict ordering used everywhere results must be deterministic:
/// sheet (case-insensitive), then row, then column.
inline int compare_position(const CellRef& a, const CellRef& b) {
    std::string sa = detail::upper_copy(a.sheet), sb = detail::upper_copy(b.sheet);
    if (sa != sb) return sa < sb ? -1 : 1;
    if (a.row != b.row) return a.row < b.row ? -1 : 1;
    if (a.col != b.col) return a.col < b.col ? -1 : 1;
    return 0;
}

struct PositionLess {
    bool operator()(const CellRef& a, const CellRef& b) const {
        return compare_position(a, b) < 0;
    }
};

}  // namespace cellsentry
