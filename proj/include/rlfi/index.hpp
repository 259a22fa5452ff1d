#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlfi/rubric.hpp"
#include "rlfi/types.hpp"

namespace rlfi::idx {

// Task-level feasibility index on the 0-100 scale; 0 exactly for
// gate-failing tasks, otherwise (mean score - 1) / 9 * 100.
struct TaskScore {
    std::string soc_code;
    std::int64_t task_id = 0;
    bool gate_pass = false;
    std::array<std::optional<int>, kNumDimensions> dimension_scores;
    double rl_index = 0.0;

    std::string key() const { return soc_code + "|" + std::to_string(task_id); }
};

struct OccupationScore {
    std::string soc_code;
    std::string occupation_title;
    double rl_weighted = 0.0;
    double rl_unweighted = 0.0;
    int n_tasks = 0;
    double gate_fail_share = 0.0;
    std::string soc_major;
};

struct DimensionStats {
    std::string dimension;
    double mean = 0.0;
    double sd = 0.0;
    double p25 = 0.0;
    double median = 0.0;
    double p75 = 0.0;
};

struct LevelStats {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double p10 = 0.0, p25 = 0.0, median = 0.0, p75 = 0.0, p90 = 0.0;
};

struct SummaryReport {
    LevelStats task;
    LevelStats occupation;  // over rl_weighted
    double task_zero_share = 0.0;       // fraction of tasks with rl_index == 0
    double task_gate_fail_share = 0.0;  // fraction failing the gate
    double gate_passing_mean = 0.0;     // conditional on gate pass
    std::map<std::string, std::pair<double, int>> soc_major_means;  // group -> (mean, n)
    std::vector<DimensionStats> dimensions;  // over gate-passing tasks
    std::vector<OccupationScore> top;
    std::vector<OccupationScore> bottom;
};

TaskScore compute_task_index(const rubric::AnnotationResult& a);

// Importance-weighted aggregation; weights are importance / sum(importance)
// within the occupation, with missing importance entering at weight 1.
// Throws when a score has no matching task record. Occupations where no
// task carries an importance rating aggregate with equal weights and are
// listed in *equal_weight_warnings when given.
std::vector<OccupationScore> aggregate_occupation(
    const std::vector<TaskScore>& scores, const std::vector<TaskRecord>& tasks,
    std::vector<std::string>* equal_weight_warnings = nullptr);

SummaryReport summarize(const std::vector<TaskScore>& scores,
                        const std::vector<OccupationScore>& occs, int top_k = 10);

nlohmann::json to_json(const SummaryReport& report);

// Artifact I/O: column layouts are part of the toolkit's interface.
// task_scores.csv: soc_code,task_id,gate_pass,D1..D8,rl_index
void write_task_scores_csv(const std::string& path, const std::vector<TaskScore>& scores,
                           const std::string& meta_comment);
std::vector<TaskScore> read_task_scores_csv(const std::string& path);

// occupation_index.csv: soc_code,occupation_title,rl_weighted,rl_unweighted,
//                       n_tasks,gate_fail_share,soc_major
void write_occupation_csv(const std::string& path,
                          const std::vector<OccupationScore>& occs,
                          const std::string& meta_comment);
std::vector<OccupationScore> read_occupation_csv(const std::string& path);

void write_dimension_stats_csv(const std::string& path,
                               const std::vector<DimensionStats>& stats,
                               const std::string& meta_comment);

}  // namespace rlfi::idx
