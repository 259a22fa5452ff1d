#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlfi/index.hpp"
#include "rlfi/types.hpp"

namespace rlfi::cmp {

// Join bookkeeping for the beta merge.
struct BetaJoin {
    std::map<std::string, double> beta_weighted;  // soc_code -> aggregate
    std::size_t matched_tasks = 0;
    std::size_t unmatched_beta = 0;   // beta rows with no task record
    std::size_t unmatched_tasks = 0;  // task records with no beta
    std::vector<std::string> excluded_occupations;  // no matched beta tasks
};

// Importance-weighted mean beta per occupation over the matched task set.
// restrict_to, when given, keeps only those task keys (used for the
// gate-passing rebuild).
BetaJoin aggregate_beta(const std::vector<BetaRecord>& beta,
                        const std::vector<TaskRecord>& tasks,
                        const std::vector<std::string>* restrict_to = nullptr);

// Axis convention: quadrant letters are (beta, rl); values <= median are low.
enum class Quadrant { HH, HL, LH, LL };
const char* to_string(Quadrant q);

struct ComparisonRow {
    std::string soc_code;
    std::string occupation_title;
    double rl_weighted = 0.0;
    double beta_weighted = 0.0;
    double rl_rank = 0.0;    // ascending in value, average ties
    double beta_rank = 0.0;
    double rank_gap = 0.0;   // beta_rank - rl_rank
    Quadrant quadrant = Quadrant::LL;
};

// Builds comparison rows for occupations present in both aggregates;
// computes ranks, rank gaps and the median-split quadrants.
std::vector<ComparisonRow> build_rows(const std::vector<idx::OccupationScore>& occs,
                                      const BetaJoin& beta);

struct CorrelationResult {
    double pearson = 0.0;
    double spearman = 0.0;
    std::size_t n = 0;
};

CorrelationResult correlations(const std::vector<ComparisonRow>& rows);

// Rebuilds both occupation aggregates from gate-passing tasks only, then
// the comparison rows over the occupations that survive.
std::vector<ComparisonRow> build_rows_gate_passing(
    const std::vector<idx::TaskScore>& scores, const std::vector<TaskRecord>& tasks,
    const std::vector<BetaRecord>& beta, BetaJoin* join_out = nullptr);

// Top-k exemplars per quadrant, furthest from the median point in
// IQR-standardized units.
std::map<Quadrant, std::vector<ComparisonRow>> quadrant_exemplars(
    const std::vector<ComparisonRow>& rows, int k);

struct DivergenceResult {
    std::vector<ComparisonRow> most_positive;  // beta rank >> rl rank
    std::vector<ComparisonRow> most_negative;  // rl rank >> beta rank
};

// Ties broken by soc_code ascending.
DivergenceResult divergence(const std::vector<ComparisonRow>& rows, int k);

void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows,
                          const std::string& meta_comment);
nlohmann::json exemplars_to_json(const std::map<Quadrant, std::vector<ComparisonRow>>& ex);
nlohmann::json divergence_to_json(const DivergenceResult& d);
void write_scatter_csv(const std::string& path, const std::vector<ComparisonRow>& rows,
                       const std::string& meta_comment);

}  // namespace rlfi::cmp
