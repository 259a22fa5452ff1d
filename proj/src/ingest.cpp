#include "rlfi/ingest.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rlfi/csv.hpp"

namespace rlfi::ingest {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end && *end == '\0' && std::isfinite(out);
}

bool parse_int(const std::string& s, std::int64_t& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtoll(t.c_str(), &end, 10);
    return end && *end == '\0';
}

std::string join_fields(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

}  // namespace

LoadResult<TaskRecord> load_tasks(const std::string& tasks_path, char delimiter) {
    const auto t = csv::read_delimited(tasks_path, delimiter);
    const int c_soc = t.require("onet_soc_code");
    const int c_title = t.require("title");
    const int c_id = t.require("task_id");
    const int c_task = t.require("task");

    LoadResult<TaskRecord> res;
    res.input_rows = t.rows.size();
    std::unordered_set<std::string> seen;
    seen.reserve(t.rows.size() * 2);

    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = t.line[i];
        auto reject = [&](const std::string& reason) {
            res.rejects.push_back({tasks_path, line, reason, join_fields(row)});
        };
        const int max_col = std::max({c_soc, c_title, c_id, c_task});
        if (static_cast<int>(row.size()) <= max_col) {
            reject("too few fields");
            continue;
        }
        TaskRecord rec;
        rec.soc_code = trim(row[static_cast<std::size_t>(c_soc)]);
        rec.occupation_title = trim(row[static_cast<std::size_t>(c_title)]);
        rec.task_text = trim(row[static_cast<std::size_t>(c_task)]);
        if (rec.soc_code.empty()) {
            reject("empty onet_soc_code");
            continue;
        }
        if (rec.task_text.empty()) {
            reject("empty task text");
            continue;
        }
        if (!parse_int(row[static_cast<std::size_t>(c_id)], rec.task_id)) {
            reject("malformed task_id '" + row[static_cast<std::size_t>(c_id)] + "'");
            continue;
        }
        if (!seen.insert(rec.key()).second) {
            ++res.duplicates;
            continue;
        }
        res.records.push_back(std::move(rec));
    }
    return res;
}

LoadResult<TaskRecord> load_task_corpus(const std::string& tasks_path,
                                        const std::string& importance_path,
                                        char delimiter) {
    LoadResult<TaskRecord> res = load_tasks(tasks_path, delimiter);

    const auto imp = csv::read_delimited(importance_path, delimiter);
    const int c_soc = imp.require("onet_soc_code");
    const int c_id = imp.require("task_id");
    const int c_imp = imp.require("importance");

    std::unordered_map<std::string, double> ratings;
    ratings.reserve(imp.rows.size() * 2);
    std::size_t dup_ratings = 0;
    for (std::size_t i = 0; i < imp.rows.size(); ++i) {
        const auto& row = imp.rows[i];
        const std::size_t line = imp.line[i];
        auto reject = [&](const std::string& reason) {
            res.rejects.push_back({importance_path, line, reason, join_fields(row)});
        };
        const int max_col = std::max({c_soc, c_id, c_imp});
        if (static_cast<int>(row.size()) <= max_col) {
            reject("too few fields");
            continue;
        }
        std::int64_t task_id = 0;
        if (!parse_int(row[static_cast<std::size_t>(c_id)], task_id)) {
            reject("malformed task_id '" + row[static_cast<std::size_t>(c_id)] + "'");
            continue;
        }
        double value = 0.0;
        if (!parse_double(row[static_cast<std::size_t>(c_imp)], value)) {
            reject("malformed importance '" + row[static_cast<std::size_t>(c_imp)] + "'");
            continue;
        }
        if (value < 1.0 || value > 5.0) {
            reject("importance " + row[static_cast<std::size_t>(c_imp)] +
                   " outside [1,5]");
            continue;
        }
        const std::string key = trim(row[static_cast<std::size_t>(c_soc)]) + "|" +
                                std::to_string(task_id);
        if (!ratings.emplace(key, value).second) ++dup_ratings;
    }
    if (dup_ratings > 0)
        res.warnings.push_back(std::to_string(dup_ratings) +
                               " duplicate importance rows ignored (first kept)");

    std::size_t missing = 0;
    for (auto& rec : res.records) {
        auto it = ratings.find(rec.key());
        if (it != ratings.end())
            rec.importance = it->second;
        else
            ++missing;
    }
    if (missing > 0)
        res.warnings.push_back(std::to_string(missing) +
                               " tasks without importance rating (equal-weight fallback)");
    return res;
}

LoadResult<BetaRecord> load_beta(const std::string& path, char delimiter) {
    const auto t = csv::read_delimited(path, delimiter);
    const int c_soc = t.require("onet_soc_code");
    const int c_id = t.require("task_id");
    const int c_beta = t.require("beta");

    LoadResult<BetaRecord> res;
    res.input_rows = t.rows.size();
    if (t.rows.empty()) res.warnings.push_back(path + ": no data rows");

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        auto reject = [&](const std::string& reason) {
            res.rejects.push_back({path, t.line[i], reason, join_fields(row)});
        };
        const int max_col = std::max({c_soc, c_id, c_beta});
        if (static_cast<int>(row.size()) <= max_col) {
            reject("too few fields");
            continue;
        }
        BetaRecord rec;
        rec.soc_code = trim(row[static_cast<std::size_t>(c_soc)]);
        if (!parse_int(row[static_cast<std::size_t>(c_id)], rec.task_id)) {
            reject("malformed task_id '" + row[static_cast<std::size_t>(c_id)] + "'");
            continue;
        }
        double b = 0.0;
        if (!parse_double(row[static_cast<std::size_t>(c_beta)], b) ||
            (b != 0.0 && b != 0.5 && b != 1.0)) {
            reject("beta '" + row[static_cast<std::size_t>(c_beta)] +
                   "' not in {0, 0.5, 1}");
            continue;
        }
        rec.beta = b;
        if (!seen.insert(rec.key()).second) {
            ++res.duplicates;
            continue;
        }
        res.records.push_back(std::move(rec));
    }
    return res;
}

PanelLoadResult load_panel(const std::string& path, const PeriodWindow& window,
                           char delimiter) {
    const auto t = csv::read_delimited(path, delimiter);
    const int c_soc = t.require("onet_soc_code");
    const int c_period = t.require("period");
    const int c_open = t.require("job_openings");

    PanelLoadResult res;
    res.input_rows = t.rows.size();
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        auto reject = [&](const std::string& reason) {
            res.rejects.push_back({path, t.line[i], reason, join_fields(row)});
        };
        const int max_col = std::max({c_soc, c_period, c_open});
        if (static_cast<int>(row.size()) <= max_col) {
            reject("too few fields");
            continue;
        }
        PanelObservation obs;
        obs.soc_code = trim(row[static_cast<std::size_t>(c_soc)]);
        if (obs.soc_code.empty()) {
            reject("empty onet_soc_code");
            continue;
        }
        try {
            obs.period = YearMonth::parse(row[static_cast<std::size_t>(c_period)]);
        } catch (const std::invalid_argument& e) {
            reject(e.what());
            continue;
        }
        if (!parse_int(row[static_cast<std::size_t>(c_open)], obs.job_openings) ||
            obs.job_openings < 0) {
            reject("malformed job_openings '" + row[static_cast<std::size_t>(c_open)] + "'");
            continue;
        }
        if (!window.contains(obs.period)) {
            ++res.out_of_window;
            continue;
        }
        obs.soc2 = soc_major_group(obs.soc_code);
        if (!seen.insert(obs.soc_code + "|" + obs.period.str()).second) {
            ++res.duplicates;
            continue;
        }
        if (obs.job_openings == 0) ++res.zero_openings;
        res.records.push_back(std::move(obs));
    }
    if (res.zero_openings > 0)
        res.warnings.push_back(std::to_string(res.zero_openings) +
                               " occupation-months with zero openings (dropped at balancing)");
    return res;
}

LoadResult<OccupationProfile> load_profiles(const std::string& path, char delimiter) {
    const auto t = csv::read_delimited(path, delimiter);
    const int c_soc = t.require("onet_soc_code");
    const int c_sal = t.require("mean_salary");
    const int c_sen = t.require("mean_seniority");
    const int c_emp = t.require("employment");
    const int c_naics = t.col("naics2");

    LoadResult<OccupationProfile> res;
    res.input_rows = t.rows.size();
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        auto reject = [&](const std::string& reason) {
            res.rejects.push_back({path, t.line[i], reason, join_fields(row)});
        };
        const int max_col = std::max({c_soc, c_sal, c_sen, c_emp});
        if (static_cast<int>(row.size()) <= max_col) {
            reject("too few fields");
            continue;
        }
        OccupationProfile p;
        p.soc_code = trim(row[static_cast<std::size_t>(c_soc)]);
        double salary = 0.0, seniority = 0.0;
        std::int64_t employment = 0;
        if (!parse_double(row[static_cast<std::size_t>(c_sal)], salary) || salary <= 0.0) {
            reject("mean_salary must be a positive number, got '" +
                   row[static_cast<std::size_t>(c_sal)] + "'");
            continue;
        }
        if (!parse_double(row[static_cast<std::size_t>(c_sen)], seniority) ||
            seniority < 1.0 || seniority > 7.0) {
            reject("mean_seniority '" + row[static_cast<std::size_t>(c_sen)] +
                   "' outside [1,7]");
            continue;
        }
        if (!parse_int(row[static_cast<std::size_t>(c_emp)], employment) || employment < 0) {
            reject("employment must be a nonnegative integer, got '" +
                   row[static_cast<std::size_t>(c_emp)] + "'");
            continue;
        }
        p.mean_log_salary = std::log(salary);
        p.mean_seniority = seniority;
        p.employment_count = employment;
        if (c_naics >= 0 && static_cast<int>(row.size()) > c_naics) {
            const std::string naics = trim(row[static_cast<std::size_t>(c_naics)]);
            if (!naics.empty()) p.naics_sector = naics;
        }
        if (!seen.insert(p.soc_code).second) {
            ++res.duplicates;
            continue;
        }
        res.records.push_back(std::move(p));
    }
    return res;
}

void write_rejects_jsonl(const std::string& path, const std::vector<Reject>& rejects,
                         const std::string& meta_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    if (!meta_json.empty()) out << meta_json << "\n";
    for (const auto& r : rejects) {
        nlohmann::json j{{"source", r.source},
                         {"line", r.line},
                         {"reason", r.reason},
                         {"raw", r.raw}};
        out << j.dump() << "\n";
    }
}

}  // namespace rlfi::ingest
