#include "rlfi/compare.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "rlfi/csv.hpp"
#include "rlfi/stats.hpp"

namespace rlfi::cmp {

const char* to_string(Quadrant q) {
    switch (q) {
        case Quadrant::HH: return "HH";
        case Quadrant::HL: return "HL";
        case Quadrant::LH: return "LH";
        case Quadrant::LL: return "LL";
    }
    return "LL";
}

BetaJoin aggregate_beta(const std::vector<BetaRecord>& beta,
                        const std::vector<TaskRecord>& tasks,
                        const std::vector<std::string>* restrict_to) {
    std::unordered_map<std::string, const TaskRecord*> by_key;
    by_key.reserve(tasks.size() * 2);
    for (const auto& t : tasks) by_key.emplace(t.key(), &t);

    std::unordered_set<std::string> keep;
    if (restrict_to) keep.insert(restrict_to->begin(), restrict_to->end());

    struct Acc {
        double weight_sum = 0.0;
        double weighted = 0.0;
    };
    std::map<std::string, Acc> groups;
    std::unordered_set<std::string> matched_keys;

    BetaJoin out;
    for (const auto& b : beta) {
        auto it = by_key.find(b.key());
        if (it == by_key.end()) {
            ++out.unmatched_beta;
            continue;
        }
        if (restrict_to && keep.find(b.key()) == keep.end()) continue;
        const TaskRecord& rec = *it->second;
        Acc& acc = groups[b.soc_code];
        const double w = rec.importance.value_or(1.0);
        acc.weight_sum += w;
        acc.weighted += w * b.beta;
        ++out.matched_tasks;
        matched_keys.insert(b.key());
    }
    for (const auto& t : tasks)
        if (matched_keys.find(t.key()) == matched_keys.end()) ++out.unmatched_tasks;

    std::set<std::string> all_occs;
    for (const auto& t : tasks) all_occs.insert(t.soc_code);
    for (const auto& soc : all_occs)
        if (groups.find(soc) == groups.end()) out.excluded_occupations.push_back(soc);

    for (const auto& [soc, acc] : groups)
        out.beta_weighted[soc] = acc.weighted / acc.weight_sum;
    return out;
}

namespace {

void assign_ranks_and_quadrants(std::vector<ComparisonRow>& rows) {
    std::vector<double> rl(rows.size()), bw(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rl[i] = rows[i].rl_weighted;
        bw[i] = rows[i].beta_weighted;
    }
    const auto rl_ranks = stats::average_ranks(rl);
    const auto bw_ranks = stats::average_ranks(bw);
    const double rl_median = stats::quantile(rl, 0.5);
    const double bw_median = stats::quantile(bw, 0.5);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].rl_rank = rl_ranks[i];
        rows[i].beta_rank = bw_ranks[i];
        rows[i].rank_gap = rows[i].beta_rank - rows[i].rl_rank;
        // <= median classifies as low on that axis
        const bool beta_high = rows[i].beta_weighted > bw_median;
        const bool rl_high = rows[i].rl_weighted > rl_median;
        rows[i].quadrant = beta_high ? (rl_high ? Quadrant::HH : Quadrant::HL)
                                     : (rl_high ? Quadrant::LH : Quadrant::LL);
    }
}

}  // namespace

std::vector<ComparisonRow> build_rows(const std::vector<idx::OccupationScore>& occs,
                                      const BetaJoin& beta) {
    std::vector<ComparisonRow> rows;
    rows.reserve(occs.size());
    for (const auto& o : occs) {
        auto it = beta.beta_weighted.find(o.soc_code);
        if (it == beta.beta_weighted.end()) continue;
        ComparisonRow r;
        r.soc_code = o.soc_code;
        r.occupation_title = o.occupation_title;
        r.rl_weighted = o.rl_weighted;
        r.beta_weighted = it->second;
        rows.push_back(std::move(r));
    }
    if (!rows.empty()) assign_ranks_and_quadrants(rows);
    return rows;
}

CorrelationResult correlations(const std::vector<ComparisonRow>& rows) {
    if (rows.size() < 3)
        throw std::invalid_argument("correlations need at least 3 rows");
    std::vector<double> rl(rows.size()), bw(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rl[i] = rows[i].rl_weighted;
        bw[i] = rows[i].beta_weighted;
    }
    CorrelationResult out;
    out.pearson = stats::pearson(rl, bw);
    out.spearman = stats::spearman(rl, bw);
    out.n = rows.size();
    return out;
}

std::vector<ComparisonRow> build_rows_gate_passing(
    const std::vector<idx::TaskScore>& scores, const std::vector<TaskRecord>& tasks,
    const std::vector<BetaRecord>& beta, BetaJoin* join_out) {
    std::vector<idx::TaskScore> passing;
    std::vector<std::string> passing_keys;
    for (const auto& s : scores)
        if (s.gate_pass) {
            passing.push_back(s);
            passing_keys.push_back(s.key());
        }
    if (passing.empty()) return {};

    const auto occs = idx::aggregate_occupation(passing, tasks);
    const auto join = aggregate_beta(beta, tasks, &passing_keys);
    if (join_out) *join_out = join;
    return build_rows(occs, join);
}

std::map<Quadrant, std::vector<ComparisonRow>> quadrant_exemplars(
    const std::vector<ComparisonRow>& rows, int k) {
    if (rows.size() < 4)
        throw std::invalid_argument("quadrant analysis needs at least 4 rows");
    std::vector<double> rl, bw;
    for (const auto& r : rows) {
        rl.push_back(r.rl_weighted);
        bw.push_back(r.beta_weighted);
    }
    const double rl_med = stats::quantile(rl, 0.5);
    const double bw_med = stats::quantile(bw, 0.5);
    double rl_iqr = stats::quantile(rl, 0.75) - stats::quantile(rl, 0.25);
    double bw_iqr = stats::quantile(bw, 0.75) - stats::quantile(bw, 0.25);
    if (rl_iqr <= 0.0) rl_iqr = 1.0;
    if (bw_iqr <= 0.0) bw_iqr = 1.0;

    auto distance = [&](const ComparisonRow& r) {
        const double dx = (r.beta_weighted - bw_med) / bw_iqr;
        const double dy = (r.rl_weighted - rl_med) / rl_iqr;
        return std::sqrt(dx * dx + dy * dy);
    };

    std::map<Quadrant, std::vector<ComparisonRow>> out;
    for (Quadrant q : {Quadrant::HH, Quadrant::HL, Quadrant::LH, Quadrant::LL}) {
        std::vector<ComparisonRow> members;
        for (const auto& r : rows)
            if (r.quadrant == q) members.push_back(r);
        std::sort(members.begin(), members.end(),
                  [&](const ComparisonRow& a, const ComparisonRow& b) {
                      const double da = distance(a), db = distance(b);
                      if (da != db) return da > db;
                      return a.soc_code < b.soc_code;
                  });
        if (static_cast<int>(members.size()) > k)
            members.resize(static_cast<std::size_t>(k));
        out[q] = std::move(members);
    }
    return out;
}

DivergenceResult divergence(const std::vector<ComparisonRow>& rows, int k) {
    DivergenceResult out;
    std::vector<ComparisonRow> sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.rank_gap != b.rank_gap) return a.rank_gap > b.rank_gap;
        return a.soc_code < b.soc_code;
    });
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), sorted.size());
    out.most_positive.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(kk));
    std::sort(sorted.begin(), sorted.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.rank_gap != b.rank_gap) return a.rank_gap < b.rank_gap;
        return a.soc_code < b.soc_code;
    });
    out.most_negative.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(kk));
    return out;
}

namespace {

nlohmann::json row_json(const ComparisonRow& r) {
    return nlohmann::json{{"soc_code", r.soc_code},
                          {"occupation_title", r.occupation_title},
                          {"rl_weighted", r.rl_weighted},
                          {"beta_weighted", r.beta_weighted},
                          {"rl_rank", r.rl_rank},
                          {"beta_rank", r.beta_rank},
                          {"rank_gap", r.rank_gap},
                          {"quadrant", to_string(r.quadrant)}};
}

}  // namespace

void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows,
                          const std::string& meta_comment) {
    const std::vector<std::string> header = {"soc_code",  "occupation_title", "rl_weighted",
                                             "beta_weighted", "rl_rank",      "beta_rank",
                                             "rank_gap",  "quadrant"};
    std::vector<std::vector<std::string>> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back({r.soc_code, r.occupation_title, csv::format_double(r.rl_weighted),
                       csv::format_double(r.beta_weighted), csv::format_double(r.rl_rank),
                       csv::format_double(r.beta_rank), csv::format_double(r.rank_gap),
                       to_string(r.quadrant)});
    csv::write_csv(path, header, out, meta_comment);
}

nlohmann::json exemplars_to_json(const std::map<Quadrant, std::vector<ComparisonRow>>& ex) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [q, members] : ex) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : members) arr.push_back(row_json(r));
        j[to_string(q)] = arr;
    }
    return j;
}

nlohmann::json divergence_to_json(const DivergenceResult& d) {
    nlohmann::json pos = nlohmann::json::array(), neg = nlohmann::json::array();
    for (const auto& r : d.most_positive) pos.push_back(row_json(r));
    for (const auto& r : d.most_negative) neg.push_back(row_json(r));
    return nlohmann::json{{"beta_rank_exceeds_rl_rank", pos},
                          {"rl_rank_exceeds_beta_rank", neg}};
}

void write_scatter_csv(const std::string& path, const std::vector<ComparisonRow>& rows,
                       const std::string& meta_comment) {
    const std::vector<std::string> header = {"soc_code", "beta_weighted", "rl_weighted",
                                             "quadrant"};
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows)
        out.push_back({r.soc_code, csv::format_double(r.beta_weighted),
                       csv::format_double(r.rl_weighted), to_string(r.quadrant)});
    csv::write_csv(path, header, out, meta_comment);
}

}  // namespace rlfi::cmp
