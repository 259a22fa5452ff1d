#include "rlfi/index.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "rlfi/csv.hpp"
#include "rlfi/stats.hpp"

namespace rlfi::idx {

TaskScore compute_task_index(const rubric::AnnotationResult& a) {
    TaskScore s;
    s.soc_code = a.soc_code;
    s.task_id = a.task_id;
    s.gate_pass = a.gate_pass;
    if (!a.gate_pass) {
        s.rl_index = 0.0;
        return s;
    }
    double sum = 0.0;
    for (int d = 0; d < kNumDimensions; ++d) {
        const auto& v = a.dimension_scores[static_cast<std::size_t>(d)];
        if (!v)
            throw std::invalid_argument("gate-passing annotation missing " +
                                        dimension_label(d));
        s.dimension_scores[static_cast<std::size_t>(d)] = *v;
        sum += *v;
    }
    const double mean_score = sum / kNumDimensions;
    s.rl_index = (mean_score - 1.0) / 9.0 * 100.0;
    return s;
}

std::vector<OccupationScore> aggregate_occupation(
    const std::vector<TaskScore>& scores, const std::vector<TaskRecord>& tasks,
    std::vector<std::string>* equal_weight_warnings) {
    std::unordered_map<std::string, const TaskRecord*> by_key;
    by_key.reserve(tasks.size() * 2);
    for (const auto& t : tasks) by_key.emplace(t.key(), &t);

    struct Acc {
        std::string title;
        double weight_sum = 0.0;
        double weighted = 0.0;
        double plain_sum = 0.0;
        int n = 0;
        int gate_fail = 0;
        bool any_importance = false;
    };
    std::map<std::string, Acc> groups;  // ordered by soc_code

    for (const auto& s : scores) {
        auto it = by_key.find(s.key());
        if (it == by_key.end())
            throw std::runtime_error("task score " + s.key() +
                                     " has no matching task record");
        const TaskRecord& rec = *it->second;
        Acc& acc = groups[s.soc_code];
        if (acc.title.empty()) acc.title = rec.occupation_title;
        const double w = rec.importance.value_or(1.0);
        acc.weight_sum += w;
        acc.weighted += w * s.rl_index;
        acc.plain_sum += s.rl_index;
        acc.n += 1;
        if (!s.gate_pass) acc.gate_fail += 1;
        if (rec.importance) acc.any_importance = true;
    }

    std::vector<OccupationScore> out;
    out.reserve(groups.size());
    for (auto& [soc, acc] : groups) {
        OccupationScore o;
        o.soc_code = soc;
        o.occupation_title = acc.title;
        o.rl_weighted = acc.weighted / acc.weight_sum;
        o.rl_unweighted = acc.plain_sum / acc.n;
        o.n_tasks = acc.n;
        o.gate_fail_share = static_cast<double>(acc.gate_fail) / acc.n;
        o.soc_major = soc_major_group(soc);
        if (!acc.any_importance && equal_weight_warnings)
            equal_weight_warnings->push_back(soc + ": no importance ratings, equal weights");
        out.push_back(std::move(o));
    }
    return out;
}

namespace {

LevelStats level_stats(std::vector<double> values) {
    LevelStats s;
    s.n = values.size();
    s.mean = stats::mean(values);
    s.sd = values.size() > 1 ? stats::sample_sd(values) : 0.0;
    std::sort(values.begin(), values.end());
    s.p10 = stats::quantile_sorted(values, 0.10);
    s.p25 = stats::quantile_sorted(values, 0.25);
    s.median = stats::quantile_sorted(values, 0.50);
    s.p75 = stats::quantile_sorted(values, 0.75);
    s.p90 = stats::quantile_sorted(values, 0.90);
    return s;
}

nlohmann::json level_json(const LevelStats& s) {
    return nlohmann::json{{"n", s.n},     {"mean", s.mean},     {"sd", s.sd},
                          {"p10", s.p10}, {"p25", s.p25},       {"median", s.median},
                          {"p75", s.p75}, {"p90", s.p90}};
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

nlohmann::json occ_row(const OccupationScore& o) {
    return nlohmann::json{{"soc_code", o.soc_code},
                          {"occupation_title", o.occupation_title},
                          {"rl_weighted", round2(o.rl_weighted)}};
}

}  // namespace

SummaryReport summarize(const std::vector<TaskScore>& scores,
                        const std::vector<OccupationScore>& occs, int top_k) {
    if (scores.empty() || occs.empty())
        throw std::invalid_argument("summarize: empty inputs");

    SummaryReport rep;
    std::vector<double> task_vals, occ_vals, passing;
    task_vals.reserve(scores.size());
    std::size_t zeros = 0, gate_fails = 0;
    for (const auto& s : scores) {
        task_vals.push_back(s.rl_index);
        if (s.rl_index == 0.0) ++zeros;
        if (!s.gate_pass)
            ++gate_fails;
        else
            passing.push_back(s.rl_index);
    }
    rep.task = level_stats(task_vals);
    rep.task_zero_share = static_cast<double>(zeros) / static_cast<double>(scores.size());
    rep.task_gate_fail_share =
        static_cast<double>(gate_fails) / static_cast<double>(scores.size());
    rep.gate_passing_mean = passing.empty() ? 0.0 : stats::mean(passing);

    for (const auto& o : occs) occ_vals.push_back(o.rl_weighted);
    rep.occupation = level_stats(occ_vals);

    std::map<std::string, std::pair<double, int>> groups;
    for (const auto& o : occs) {
        auto& [sum, n] = groups[o.soc_major];
        sum += o.rl_weighted;
        n += 1;
    }
    for (auto& [g, acc] : groups)
        rep.soc_major_means[g] = {acc.first / acc.second, acc.second};

    // Dimension stats over gate-passing tasks.
    for (int d = 0; d < kNumDimensions; ++d) {
        std::vector<double> vals;
        for (const auto& s : scores)
            if (s.gate_pass && s.dimension_scores[static_cast<std::size_t>(d)])
                vals.push_back(*s.dimension_scores[static_cast<std::size_t>(d)]);
        if (vals.empty()) continue;
        DimensionStats ds;
        ds.dimension = dimension_label(d);
        ds.mean = stats::mean(vals);
        ds.sd = vals.size() > 1 ? stats::sample_sd(vals) : 0.0;
        std::sort(vals.begin(), vals.end());
        ds.p25 = stats::quantile_sorted(vals, 0.25);
        ds.median = stats::quantile_sorted(vals, 0.50);
        ds.p75 = stats::quantile_sorted(vals, 0.75);
        rep.dimensions.push_back(ds);
    }

    std::vector<OccupationScore> sorted = occs;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.rl_weighted != b.rl_weighted) return a.rl_weighted > b.rl_weighted;
        return a.soc_code < b.soc_code;
    });
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(top_k), sorted.size());
    rep.top.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k));
    rep.bottom.assign(sorted.end() - static_cast<std::ptrdiff_t>(k), sorted.end());
    std::reverse(rep.bottom.begin(), rep.bottom.end());
    return rep;
}

nlohmann::json to_json(const SummaryReport& rep) {
    nlohmann::json j;
    j["task_level"] = level_json(rep.task);
    j["task_level"]["zero_share"] = rep.task_zero_share;
    j["task_level"]["gate_fail_share"] = rep.task_gate_fail_share;
    j["task_level"]["gate_passing_mean"] = rep.gate_passing_mean;
    j["occupation_level"] = level_json(rep.occupation);
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& [g, v] : rep.soc_major_means)
        groups[g] = {{"mean", v.first}, {"n_occupations", v.second}};
    j["soc_major_means"] = groups;
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : rep.dimensions)
        dims.push_back({{"dimension", d.dimension},
                        {"mean", d.mean},
                        {"sd", d.sd},
                        {"p25", d.p25},
                        {"median", d.median},
                        {"p75", d.p75}});
    j["dimension_stats"] = dims;
    nlohmann::json top = nlohmann::json::array(), bottom = nlohmann::json::array();
    for (const auto& o : rep.top) top.push_back(occ_row(o));
    for (const auto& o : rep.bottom) bottom.push_back(occ_row(o));
    j["top_occupations"] = top;
    j["bottom_occupations"] = bottom;
    return j;
}

// ---------------------------------------------------------------------------
// Artifact I/O

void write_task_scores_csv(const std::string& path, const std::vector<TaskScore>& scores,
                           const std::string& meta_comment) {
    std::vector<std::string> header = {"soc_code", "task_id", "gate_pass"};
    for (int d = 0; d < kNumDimensions; ++d) header.push_back(dimension_label(d));
    header.push_back("rl_index");
    std::vector<std::vector<std::string>> rows;
    rows.reserve(scores.size());
    for (const auto& s : scores) {
        std::vector<std::string> row = {s.soc_code, std::to_string(s.task_id),
                                        s.gate_pass ? "true" : "false"};
        for (int d = 0; d < kNumDimensions; ++d) {
            const auto& v = s.dimension_scores[static_cast<std::size_t>(d)];
            row.push_back(v ? std::to_string(*v) : "");
        }
        row.push_back(csv::format_double(s.rl_index));
        rows.push_back(std::move(row));
    }
    csv::write_csv(path, header, rows, meta_comment);
}

std::vector<TaskScore> read_task_scores_csv(const std::string& path) {
    const auto t = csv::read_delimited(path, ',');
    const int c_soc = t.require("soc_code");
    const int c_id = t.require("task_id");
    const int c_gate = t.require("gate_pass");
    const int c_rl = t.require("rl_index");
    std::array<int, kNumDimensions> c_dim{};
    for (int d = 0; d < kNumDimensions; ++d)
        c_dim[static_cast<std::size_t>(d)] = t.require(dimension_label(d));

    std::vector<TaskScore> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        TaskScore s;
        s.soc_code = row[static_cast<std::size_t>(c_soc)];
        s.task_id = std::stoll(row[static_cast<std::size_t>(c_id)]);
        s.gate_pass = row[static_cast<std::size_t>(c_gate)] == "true" ||
                      row[static_cast<std::size_t>(c_gate)] == "1";
        for (int d = 0; d < kNumDimensions; ++d) {
            const auto& f = row[static_cast<std::size_t>(c_dim[static_cast<std::size_t>(d)])];
            if (!f.empty()) s.dimension_scores[static_cast<std::size_t>(d)] = std::stoi(f);
        }
        s.rl_index = std::stod(row[static_cast<std::size_t>(c_rl)]);
        out.push_back(std::move(s));
    }
    return out;
}

void write_occupation_csv(const std::string& path,
                          const std::vector<OccupationScore>& occs,
                          const std::string& meta_comment) {
    const std::vector<std::string> header = {
        "soc_code", "occupation_title", "rl_weighted", "rl_unweighted",
        "n_tasks",  "gate_fail_share",  "soc_major"};
    std::vector<std::vector<std::string>> rows;
    rows.reserve(occs.size());
    for (const auto& o : occs)
        rows.push_back({o.soc_code, o.occupation_title, csv::format_double(o.rl_weighted),
                        csv::format_double(o.rl_unweighted), std::to_string(o.n_tasks),
                        csv::format_double(o.gate_fail_share), o.soc_major});
    csv::write_csv(path, header, rows, meta_comment);
}

std::vector<OccupationScore> read_occupation_csv(const std::string& path) {
    const auto t = csv::read_delimited(path, ',');
    const int c_soc = t.require("soc_code");
    const int c_title = t.require("occupation_title");
    const int c_w = t.require("rl_weighted");
    const int c_u = t.require("rl_unweighted");
    const int c_n = t.require("n_tasks");
    const int c_gf = t.require("gate_fail_share");
    const int c_mj = t.require("soc_major");
    std::vector<OccupationScore> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        OccupationScore o;
        o.soc_code = row[static_cast<std::size_t>(c_soc)];
        o.occupation_title = row[static_cast<std::size_t>(c_title)];
        o.rl_weighted = std::stod(row[static_cast<std::size_t>(c_w)]);
        o.rl_unweighted = std::stod(row[static_cast<std::size_t>(c_u)]);
        o.n_tasks = std::stoi(row[static_cast<std::size_t>(c_n)]);
        o.gate_fail_share = std::stod(row[static_cast<std::size_t>(c_gf)]);
        o.soc_major = row[static_cast<std::size_t>(c_mj)];
        out.push_back(std::move(o));
    }
    return out;
}

void write_dimension_stats_csv(const std::string& path,
                               const std::vector<DimensionStats>& stats,
                               const std::string& meta_comment) {
    const std::vector<std::string> header = {"dimension", "mean", "sd",
                                             "p25",       "median", "p75"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& d : stats)
        rows.push_back({d.dimension, csv::format_double(d.mean), csv::format_double(d.sd),
                        csv::format_double(d.p25), csv::format_double(d.median),
                        csv::format_double(d.p75)});
    csv::write_csv(path, header, rows, meta_comment);
}

}  // namespace rlfi::idx
