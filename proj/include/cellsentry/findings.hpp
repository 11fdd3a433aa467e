#pragma once

// Audit findings: the unit of the error-management feedback loop between
// reviewer and model developer.

#include <string>
#include <vector>

#include "cellsentry/model.hpp"

namespace cellsentry {

enum class Severity { Info, Warning, Error };

inline std::string_view severity_text(Severity s) {
    switch (s) {
        case Severity::Info: return "info";
        case Severity::Warning: return "warning";
        case Severity::Error: return "error";
    }
    return "warning";
}

inline std::optional<Severity> parse_severity(std::string_view s) {
    if (s == "info") return Severity::Info;
    if (s == "warning") return Severity::Warning;
    if (s == "error") return Severity::Error;
    return std::nullopt;
}

enum class FindingStatus { Open, Corrected, Verified, Waived };

inline std::string_view status_text(FindingStatus s) {
    switch (s) {
        case FindingStatus::Open: return "open";
        case FindingStatus::Corrected: return "corrected";
        case FindingStatus::Verified: return "verified";
        case FindingStatus::Waived: return "waived";
    }
    return "open";
}

inline std::optional<FindingStatus> parse_status(std::string_view s) {
    if (s == "open") return FindingStatus::Open;
    if (s == "corrected") return FindingStatus::Corrected;
    if (s == "verified") return FindingStatus::Verified;
    if (s == "waived") return FindingStatus::Waived;
    return std::nullopt;
}

/// Legal lifecycle: open -> corrected -> verified, or open -> waived.
inline bool is_legal_transition(FindingStatus from, FindingStatus to) {
    if (from == FindingStatus::Open)
        return to == FindingStatus::Corrected || to == FindingStatus::Waived;
    if (from == FindingStatus::Corrected) return to == FindingStatus::Verified;
    return false;
}

struct Finding {
    long id = 0;
    std::string rule_code;          // R### or H###
    Severity severity = Severity::Warning;
    std::vector<std::string> locations;  // rendered refs/ranges or name:<id>
    std::string message;
    FindingStatus status = FindingStatus::Open;
    int iteration = 1;

    friend bool operator==(const Finding&, const Finding&) = default;
};

inline json finding_to_json(const Finding& f) {
    return json{{"id", f.id},
                {"rule", f.rule_code},
                {"severity", std::string(severity_text(f.severity))},
                {"loc", f.locations},
                {"msg", f.message},
                {"status", std::string(status_text(f.status))},
                {"iteration", f.iteration}};
}

inline Finding finding_from_json(const json& j) {
    Finding f;
    f.id = j.at("id").get<long>();
    f.rule_code = j.at("rule").get<std::string>();
    auto sev = parse_severity(j.at("severity").get<std::string>());
    if (!sev) throw SchemaError("finding: unknown severity");
    f.severity = *sev;
    f.locations = j.at("loc").get<std::vector<std::string>>();
    f.message = j.at("msg").get<std::string>();
    auto st = parse_status(j.at("status").get<std::string>());
    if (!st) throw SchemaError("finding: unknown status");
    f.status = *st;
    f.iteration = j.at("iteration").get<int>();
    return f;
}

}  // namespace cellsentry
