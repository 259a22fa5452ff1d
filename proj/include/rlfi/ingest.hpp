#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rlfi/types.hpp"

namespace rlfi::ingest {

// Loader result: records plus full dedup/reject accounting so that
// |records| + duplicates + |rejects| == data rows read.
template <typename T>
struct LoadResult {
    std::vector<T> records;
    std::vector<Reject> rejects;
    std::size_t duplicates = 0;
    std::size_t input_rows = 0;
    std::vector<std::string> warnings;
};

struct PanelLoadResult : LoadResult<PanelObservation> {
    std::size_t out_of_window = 0;
    std::size_t zero_openings = 0;
};

// Task corpus joined with importance ratings. Rows are deduplicated on
// (soc_code, task_id); importance outside [1,5] rejects the importance row.
// Tasks without an importance rating keep importance absent (downstream
// aggregation falls back to weight 1). Throws on unreadable files or
// missing mandatory columns. Expected headers:
//   tasks:      onet_soc_code, title, task_id, task
//   importance: onet_soc_code, task_id, importance
LoadResult<TaskRecord> load_task_corpus(const std::string& tasks_path,
                                        const std::string& importance_path,
                                        char delimiter = '\0');

// Tasks file only, no importance join.
LoadResult<TaskRecord> load_tasks(const std::string& tasks_path, char delimiter = '\0');

// beta must be exactly 0, 0.5 or 1; anything else rejects the row.
// Header: onet_soc_code, task_id, beta
LoadResult<BetaRecord> load_beta(const std::string& path, char delimiter = '\0');

// Postings panel. Rows outside the window are excluded (counted); zero
// openings are kept but flagged -- the balanced-panel step drops those
// occupations. Header: onet_soc_code, period, job_openings
PanelLoadResult load_panel(const std::string& path, const PeriodWindow& window,
                           char delimiter = '\0');

// Occupation profiles; mean_salary must be positive (stored as log),
// mean_seniority in [1,7]. Header: onet_soc_code, mean_salary,
// mean_seniority, employment, naics2 (naics2 optional).
LoadResult<OccupationProfile> load_profiles(const std::string& path, char delimiter = '\0');

// Rejects report, one JSON object per line.
void write_rejects_jsonl(const std::string& path, const std::vector<Reject>& rejects,
                         const std::string& meta_json = "");

}  // namespace rlfi::ingest
