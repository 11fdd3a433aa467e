#pragma once

// Workbook domain model: the canonical JSON interchange format, cell grids,
// defined names, and model identification (fingerprinting).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <sys/stat.h>
#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "cellsentry/addr.hpp"

namespace cellsentry {

using json = nlohmann::json;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Interchange-format violation; message carries a path into the document.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NameError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Error codes
// ---------------------------------------------------------------------------

enum class ErrorCode { Div0, Ref, Value, Name, NA, Num, Null, Circ };

inline std::string_view error_code_text(ErrorCode c) {
    switch (c) {
        case ErrorCode::Div0: return "#DIV/0!";
        case ErrorCode::Ref: return "#REF!";
        case ErrorCode::Value: return "#VALUE!";
        case ErrorCode::Name: return "#NAME?";
        case ErrorCode::NA: return "#N/A";
        case ErrorCode::Num: return "#NUM!";
        case ErrorCode::Null: return "#NULL!";
        case ErrorCode::Circ: return "#CIRC!";
    }
    return "#VALUE!";
}

inline std::optional<ErrorCode> parse_error_code(std::string_view text) {
    std::string u = detail::upper_copy(text);
    if (u == "#DIV/0!") return ErrorCode::Div0;
    if (u == "#REF!") return ErrorCode::Ref;
    if (u == "#VALUE!") return ErrorCode::Value;
    if (u == "#NAME?") return ErrorCode::Name;
    if (u == "#N/A") return ErrorCode::NA;
    if (u == "#NUM!") return ErrorCode::Num;
    if (u == "#NULL!") return ErrorCode::Null;
    if (u == "#CIRC!") return ErrorCode::Circ;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

/// Literal value a model author recorded alongside a formula.
using CachedValue = std::variant<double, std::string, bool>;

struct Cell {
    enum class Kind { Blank, Label, Number, Bool, ErrorLiteral, Formula };

    Kind kind = Kind::Blank;
    std::string text;                   // Label text or Formula source ("=...")
    double number = 0.0;
    bool boolean = false;
    ErrorCode error = ErrorCode::Value;
    std::optional<CachedValue> cached;  // only meaningful for Formula cells

    static Cell blank() { return Cell{}; }
    static Cell label(std::string t) { Cell c; c.kind = Kind::Label; c.text = std::move(t); return c; }
    static Cell num(double v) { Cell c; c.kind = Kind::Number; c.number = v; return c; }
    static Cell boolean_cell(bool v) { Cell c; c.kind = Kind::Bool; c.boolean = v; return c; }
    static Cell error_literal(ErrorCode e) { Cell c; c.kind = Kind::ErrorLiteral; c.error = e; return c; }
    static Cell formula(std::string src, std::optional<CachedValue> cache = std::nullopt) {
        Cell c;
        c.kind = Kind::Formula;
        c.text = std::move(src);
        c.cached = std::move(cache);
        return c;
    }

    bool is_blank() const { return kind == Kind::Blank; }
    bool is_formula() const { return kind == Kind::Formula; }

    friend bool operator==(const Cell& a, const Cell& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Kind::Blank: return true;
            case Kind::Label: return a.text == b.text;
            case Kind::Number: return a.number == b.number;
            case Kind::Bool: return a.boolean == b.boolean;
            case Kind::ErrorLiteral: return a.error == b.error;
            case Kind::Formula: return a.text == b.text && a.cached == b.cached;
        }
        return false;
    }
};

// ---------------------------------------------------------------------------
// Sheets and names
// ---------------------------------------------------------------------------

struct GridPos {
    int row = 0;
    int col = 0;
    friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

struct Sheet {
    std::string name;
    std::map<GridPos, Cell> cells;  // row-major order; only non-blank entries

    const Cell* find_cell(int col, int row) const {
        auto it = cells.find(GridPos{row, col});
        return it == cells.end() ? nullptr : &it->second;
    }

    Cell cell_at(int col, int row) const {
        const Cell* c = find_cell(col, row);
        return c ? *c : Cell::blank();
    }

    /// Bounding box of non-blank content as (min_col, min_row, max_col, max_row),
    /// or nullopt for an empty sheet.
    std::optional<std::array<int, 4>> used_bounds() const {
        if (cells.empty()) return std::nullopt;
        int cmin = kMaxCol + 1, cmax = 0;
        int rmin = cells.begin()->first.row, rmax = cells.rbegin()->first.row;
        for (const auto& [pos, cell] : cells) {
            cmin = std::min(cmin, pos.col);
            cmax = std::max(cmax, pos.col);
        }
        return std::array<int, 4>{cmin, rmin, cmax, rmax};
    }

    friend bool operator==(const Sheet& a, const Sheet& b) {
        return a.name == b.name && a.cells == b.cells;
    }
};

struct NamedRange {
    std::string name;
    std::string target_text;          // as written in the file
    std::optional<RangeRef> parsed;   // syntactically valid target, if any

    friend bool operator==(const NamedRange& a, const NamedRange& b) {
        return a.name == b.name && a.target_text == b.target_text;
    }
};

/// Defined-name grammar: identifier that cannot be mistaken for an A1
/// address or a boolean keyword.
inline bool is_valid_defined_name(std::string_view name) {
    if (name.empty() || !detail::is_ident_start(name[0])) return false;
    for (char c : name)
        if (!detail::is_ident_char(c)) return false;
    if (is_a1_address(name)) return false;
    if (detail::iequals(name, "TRUE") || detail::iequals(name, "FALSE")) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Workbook
// ---------------------------------------------------------------------------

struct Workbook {
    std::vector<Sheet> sheets;
    std::vector<NamedRange> names;
    std::map<std::string, std::string> meta;

    int sheet_index(std::string_view name) const {
        for (size_t i = 0; i < sheets.size(); ++i)
            if (detail::iequals(sheets[i].name, name)) return static_cast<int>(i);
        return -1;
    }

    const Sheet* find_sheet(std::string_view name) const {
        int i = sheet_index(name);
        return i < 0 ? nullptr : &sheets[i];
    }

    const NamedRange* find_name(std::string_view name) const {
        for (const auto& n : names)
            if (detail::iequals(n.name, name)) return &n;
        return nullptr;
    }

    Cell cell(const CellRef& ref) const {
        const Sheet* s = find_sheet(ref.sheet);
        return s ? s->cell_at(ref.col, ref.row) : Cell::blank();
    }

    /// Canonical spelling of a sheet name as stored in the workbook.
    std::string canonical_sheet(std::string_view name) const {
        const Sheet* s = find_sheet(name);
        return s ? s->name : std::string(name);
    }

    size_t non_blank_count() const {
        size_t n = 0;
        for (const auto& s : sheets) n += s.cells.size();
        return n;
    }

    friend bool operator==(const Workbook& a, const Workbook& b) {
        return a.sheets == b.sheets && a.names == b.names && a.meta == b.meta;
    }
};

// ---------------------------------------------------------------------------
// Interchange format
// ---------------------------------------------------------------------------

namespace detail {

inline Cell cell_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw SchemaError(where + ": cell must be an object");
    bool has_f = j.contains("f"), has_v = j.contains("v"), has_e = j.contains("e");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "f" && it.key() != "v" && it.key() != "e")
            throw SchemaError(where + ": unknown cell key '" + it.key() + "'");
    if (has_e) {
        if (has_f || has_v) throw SchemaError(where + ": 'e' cannot combine with 'f'/'v'");
        if (!j["e"].is_string()) throw SchemaError(where + ": 'e' must be a string");
        auto code = parse_error_code(j["e"].get<std::string>());
        if (!code) throw SchemaError(where + ": unknown error code " + j["e"].get<std::string>());
        return Cell::error_literal(*code);
    }
    if (has_f) {
        if (!j["f"].is_string()) throw SchemaError(where + ": 'f' must be a string");
        std::string src = j["f"].get<std::string>();
        if (src.empty() || src[0] != '=')
            throw SchemaError(where + ": formula source must begin with '='");
        std::optional<CachedValue> cache;
        if (has_v) {
            const json& v = j["v"];
            if (v.is_number()) cache = v.get<double>();
            else if (v.is_string()) cache = v.get<std::string>();
            else if (v.is_boolean()) cache = v.get<bool>();
            else throw SchemaError(where + ": cached 'v' must be number, string or bool");
        }
        return Cell::formula(std::move(src), std::move(cache));
    }
    if (has_v) {
        const json& v = j["v"];
        if (v.is_number()) return Cell::num(v.get<double>());
        if (v.is_string()) return Cell::label(v.get<std::string>());
        if (v.is_boolean()) return Cell::boolean_cell(v.get<bool>());
        throw SchemaError(where + ": 'v' must be number, string or bool");
    }
    throw SchemaError(where + ": cell needs one of 'f', 'v', 'e'");
}

}  // namespace detail

/// Loads a workbook from parsed interchange JSON. `origin` names the source
/// in error messages.
inline Workbook load_workbook_json(const json& doc, const std::string& origin) {
    if (!doc.is_object()) throw SchemaError(origin + ": document must be a JSON object");
    Workbook wb;

    if (doc.contains("meta")) {
        const json& m = doc["meta"];
        if (!m.is_object()) throw SchemaError(origin + "/meta: must be an object");
        for (auto it = m.begin(); it != m.end(); ++it) {
            if (!it.value().is_string())
                throw SchemaError(origin + "/meta/" + it.key() + ": must be a string");
            wb.meta[it.key()] = it.value().get<std::string>();
        }
    }

    if (!doc.contains("sheets") || !doc["sheets"].is_array())
        throw SchemaError(origin + ": missing 'sheets' array");

    for (size_t si = 0; si < doc["sheets"].size(); ++si) {
        const json& js = doc["sheets"][si];
        std::string where = origin + "/sheets[" + std::to_string(si) + "]";
        if (!js.is_object() || !js.contains("name") || !js["name"].is_string())
            throw SchemaError(where + ": sheet needs a string 'name'");
        Sheet sheet;
        sheet.name = js["name"].get<std::string>();
        if (sheet.name.empty()) throw SchemaError(where + ": sheet name must be non-empty");
        if (wb.sheet_index(sheet.name) >= 0)
            throw SchemaError(where + ": duplicate sheet name '" + sheet.name + "'");
        if (js.contains("cells")) {
            const json& cells = js["cells"];
            if (!cells.is_object()) throw SchemaError(where + "/cells: must be an object");
            for (auto it = cells.begin(); it != cells.end(); ++it) {
                std::string cw = where + "/cells/" + it.key();
                auto ref = parse_a1_local(it.key());
                if (!ref || ref->col_abs || ref->row_abs) {
                    if (col_from_name(it.key().substr(0, it.key().find_first_of("0123456789"))) > 0)
                        throw SchemaError(cw + ": address out of bounds");
                    throw SchemaError(cw + ": not a plain A1 address");
                }
                sheet.cells[GridPos{ref->row, ref->col}] = detail::cell_from_json(it.value(), cw);
            }
        }
        wb.sheets.push_back(std::move(sheet));
    }

    if (doc.contains("names")) {
        const json& names = doc["names"];
        if (!names.is_array()) throw SchemaError(origin + "/names: must be an array");
        for (size_t ni = 0; ni < names.size(); ++ni) {
            const json& jn = names[ni];
            std::string where = origin + "/names[" + std::to_string(ni) + "]";
            if (!jn.is_object() || !jn.contains("name") || !jn["name"].is_string() ||
                !jn.contains("ref") || !jn["ref"].is_string())
                throw SchemaError(where + ": needs string 'name' and 'ref'");
            NamedRange nr;
            nr.name = jn["name"].get<std::string>();
            nr.target_text = jn["ref"].get<std::string>();
            if (!is_valid_defined_name(nr.name))
                throw SchemaError(where + ": invalid defined name '" + nr.name + "'");
            if (wb.find_name(nr.name))
                throw SchemaError(where + ": duplicate defined name '" + nr.name + "'");
            nr.parsed = parse_range_text(nr.target_text);
            wb.names.push_back(std::move(nr));
        }
    }
    return wb;
}

inline Workbook load_workbook(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return load_workbook_json(doc, path.filename().string());
}

inline json serialize_workbook(const Workbook& wb) {
    json doc = json::object();
    doc["meta"] = json::object();
    for (const auto& [k, v] : wb.meta) doc["meta"][k] = v;
    doc["names"] = json::array();
    for (const auto& n : wb.names) doc["names"].push_back({{"name", n.name}, {"ref", n.target_text}});
    doc["sheets"] = json::array();
    for (const auto& s : wb.sheets) {
        json js;
        js["name"] = s.name;
        json cells = json::object();
        for (const auto& [pos, cell] : s.cells) {
            std::string key = col_to_name(pos.col) + std::to_string(pos.row);
            json jc = json::object();
            switch (cell.kind) {
                case Cell::Kind::Blank: continue;
                case Cell::Kind::Label: jc["v"] = cell.text; break;
                case Cell::Kind::Number: jc["v"] = cell.number; break;
                case Cell::Kind::Bool: jc["v"] = cell.boolean; break;
                case Cell::Kind::ErrorLiteral: jc["e"] = std::string(error_code_text(cell.error)); break;
                case Cell::Kind::Formula:
                    jc["f"] = cell.text;
                    if (cell.cached) {
                        if (std::holds_alternative<double>(*cell.cached)) jc["v"] = std::get<double>(*cell.cached);
                        else if (std::holds_alternative<std::string>(*cell.cached)) jc["v"] = std::get<std::string>(*cell.cached);
                        else jc["v"] = std::get<bool>(*cell.cached);
                    }
                    break;
            }
            cells[key] = std::move(jc);
        }
        js["cells"] = std::move(cells);
        doc["sheets"].push_back(std::move(js));
    }
    return doc;
}

inline void save_workbook(const Workbook& wb, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << serialize_workbook(wb).dump(1) << "\n";
}

// ---------------------------------------------------------------------------
// Model identification
// ---------------------------------------------------------------------------

struct ModelFingerprint {
    std::string file_name;
    uint64_t byte_size = 0;
    std::string modified_timestamp;  // ISO-8601 UTC
    std::string content_hash;        // SHA-256, 64 lowercase hex chars

    friend bool operator==(const ModelFingerprint&, const ModelFingerprint&) = default;
};

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 digest failure");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

inline ModelFingerprint fingerprint_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string bytes = buf.str();

    struct stat st{};
    if (::stat(path.c_str(), &st) != 0) throw IoError("cannot stat " + path.string());
    char stamp[32];
    struct tm tmv{};
    gmtime_r(&st.st_mtime, &tmv);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tmv);

    ModelFingerprint fp;
    fp.file_name = path.filename().string();
    fp.byte_size = bytes.size();
    fp.modified_timestamp = stamp;
    fp.content_hash = sha256_hex(bytes);
    return fp;
}

inline json fingerprint_to_json(const ModelFingerprint& fp) {
    return json{{"file_name", fp.file_name},
                {"byte_size", fp.byte_size},
                {"modified_timestamp", fp.modified_timestamp},
                {"content_hash", fp.content_hash}};
}

inline ModelFingerprint fingerprint_from_json(const json& j) {
    ModelFingerprint fp;
    fp.file_name = j.at("file_name").get<std::string>();
    fp.byte_size = j.at("byte_size").get<uint64_t>();
    fp.modified_timestamp = j.at("modified_timestamp").get<std::string>();
    fp.content_hash = j.at("content_hash").get<std::string>();
    return fp;
}

// ---------------------------------------------------------------------------
// Name resolution
// ---------------------------------------------------------------------------

/// Case-insensitive defined-name lookup. Unknown and dangling names are
/// reported as errors, never silently returned.
inline RangeRef resolve_name(const Workbook& wb, std::string_view name) {
    const NamedRange* nr = wb.find_name(name);
    if (!nr) throw NameError("unknown name '" + std::string(name) + "'");
    if (!nr->parsed)
        throw NameError("dangling name '" + nr->name + "': target '" + nr->target_text +
                        "' is not a range");
    RangeRef r = *nr->parsed;
    const Sheet* s = wb.find_sheet(r.start.sheet);
    if (!s)
        throw NameError("dangling name '" + nr->name + "': sheet '" + r.start.sheet +
                        "' does not exist");
    if (!r.start.in_bounds() || !r.end.in_bounds())
        throw NameError("dangling name '" + nr->name + "': target out of bounds");
    r.start.sheet = s->name;
    r.end.sheet = s->name;
    return r;
}

}  // namespace cellsentry
