#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlfi {

// Number of scored rubric dimensions (D1..D8).
inline constexpr int kNumDimensions = 8;

// Canonical dimension labels, index 0 -> "D1".
const std::string& dimension_label(int idx);

// Maps "D3", "d3", or a descriptive name ("State Observability & Context",
// "observability", ...) to the canonical 0-based index. Returns -1 if the
// key cannot be resolved.
int canonical_dimension(const std::string& key);

// Year-month period used by the postings panel.
struct YearMonth {
    int year = 0;
    int month = 0;  // 1..12

    int index() const { return year * 12 + (month - 1); }
    std::string str() const;

    static YearMonth from_index(int idx);
    // Accepts "YYYY-MM" and "YYYY-MM-DD" (day ignored). Throws std::invalid_argument.
    static YearMonth parse(const std::string& s);

    auto operator<=>(const YearMonth&) const = default;
};

struct PeriodWindow {
    std::optional<YearMonth> start;
    std::optional<YearMonth> end;

    bool contains(const YearMonth& p) const {
        if (start && p < *start) return false;
        if (end && *end < p) return false;
        return true;
    }
};

// One occupation-task pair from the corpus.
struct TaskRecord {
    std::string soc_code;          // 8-digit O*NET-SOC, e.g. "15-1252.00"
    std::string occupation_title;
    std::int64_t task_id = 0;
    std::string task_text;
    std::optional<double> importance;  // 1..5 when present

    std::string key() const { return soc_code + "|" + std::to_string(task_id); }
};

// External AI-exposure label for one task; beta in {0, 0.5, 1}.
struct BetaRecord {
    std::string soc_code;
    std::int64_t task_id = 0;
    double beta = 0.0;

    std::string key() const { return soc_code + "|" + std::to_string(task_id); }
};

// Occupation-level labour-market profile.
struct OccupationProfile {
    std::string soc_code;
    double mean_log_salary = 0.0;
    double mean_seniority = 0.0;  // 1..7
    std::int64_t employment_count = 0;
    std::optional<std::string> naics_sector;
};

// One occupation-month of the postings panel.
struct PanelObservation {
    std::string soc_code;
    YearMonth period;
    std::int64_t job_openings = 0;
    std::string soc2;  // first two digits of soc_code
};

// Row-level input rejection, reported rather than silently dropped.
struct Reject {
    std::string source;     // input file path
    std::size_t line = 0;   // 1-based line number in the source
    std::string reason;
    std::string raw;        // offending row as read
};

// First two characters of an O*NET-SOC code ("53-4031.00" -> "53").
std::string soc_major_group(const std::string& soc_code);

}  // namespace rlfi
