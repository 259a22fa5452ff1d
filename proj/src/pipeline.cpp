#include "rlfi/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include "rlfi/artifacts.hpp"
#include "rlfi/compare.hpp"
#include "rlfi/csv.hpp"
#include "rlfi/econ.hpp"
#include "rlfi/factor.hpp"
#include "rlfi/index.hpp"
#include "rlfi/ingest.hpp"
#include "rlfi/version.hpp"

namespace rlfi::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string stage_dir(const cfg::RunConfig& c, const std::string& stage) {
    const fs::path dir = fs::path(c.out_dir) / stage;
    fs::create_directories(dir);
    return dir.string();
}

artifacts::Meta meta_for(const cfg::RunConfig& c, const std::string& stage) {
    return artifacts::Meta{stage, cfg::config_hash(c), c.seed};
}

void require_artifact(const std::string& path, const std::string& producing_stage) {
    if (!fs::exists(path))
        throw StageError(2, "missing upstream artifact " + path + " (run stage '" +
                                producing_stage + "' first)");
}

void require_input(const std::string& path, const std::string& what) {
    if (path.empty())
        throw StageError(1, what + " path not configured");
    if (!fs::exists(path))
        throw StageError(1, what + " file not found: " + path);
}

}  // namespace

std::string tasks_artifact(const cfg::RunConfig& c) {
    return (fs::path(c.out_dir) / "ingest" / "tasks.csv").string();
}

std::vector<TaskRecord> read_normalized_tasks(const std::string& path) {
    const auto t = csv::read_delimited(path, ',');
    const int c_soc = t.require("onet_soc_code");
    const int c_title = t.require("title");
    const int c_id = t.require("task_id");
    const int c_task = t.require("task");
    const int c_imp = t.require("importance");
    std::vector<TaskRecord> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        TaskRecord r;
        r.soc_code = row[static_cast<std::size_t>(c_soc)];
        r.occupation_title = row[static_cast<std::size_t>(c_title)];
        r.task_id = std::stoll(row[static_cast<std::size_t>(c_id)]);
        r.task_text = row[static_cast<std::size_t>(c_task)];
        const auto& imp = row[static_cast<std::size_t>(c_imp)];
        if (!imp.empty()) r.importance = std::stod(imp);
        out.push_back(std::move(r));
    }
    return out;
}

void run_ingest(const cfg::RunConfig& c) {
    require_input(c.tasks_path, "tasks");
    require_input(c.importance_path, "importance");
    const auto dir = stage_dir(c, "ingest");
    const auto meta = meta_for(c, "ingest");

    const auto loaded =
        ingest::load_task_corpus(c.tasks_path, c.importance_path, c.delimiter_char());

    const std::string rejects_path = dir + "/rejects.jsonl";
    ingest::write_rejects_jsonl(rejects_path, loaded.rejects, meta.jsonl_line());
    if (loaded.records.empty())
        throw StageError(3, "no valid task records; see rejects at " + rejects_path);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(loaded.records.size());
    for (const auto& r : loaded.records)
        rows.push_back({r.soc_code, r.occupation_title, std::to_string(r.task_id),
                        r.task_text,
                        r.importance ? csv::format_double(*r.importance) : ""});
    csv::write_csv(dir + "/tasks.csv",
                   {"onet_soc_code", "title", "task_id", "task", "importance"}, rows,
                   meta.csv_comment());

    std::set<std::string> occs;
    for (const auto& r : loaded.records) occs.insert(r.soc_code);
    json report{{"input_rows", loaded.input_rows},
                {"records", loaded.records.size()},
                {"occupations", occs.size()},
                {"duplicates", loaded.duplicates},
                {"rejects", loaded.rejects.size()},
                {"warnings", loaded.warnings}};
    artifacts::write_json(dir + "/ingest_report.json", report, meta);

    std::cout << "ingest: " << loaded.records.size() << " tasks across " << occs.size()
              << " occupations (" << loaded.duplicates << " duplicates, "
              << loaded.rejects.size() << " rejects -> " << rejects_path << ")\n";
    if (!loaded.rejects.empty())
        std::cout << "ingest: rejects recorded at " << rejects_path << "\n";
}

void run_score(const cfg::RunConfig& c, const std::atomic<bool>* cancel) {
    require_artifact(tasks_artifact(c), "ingest");
    const auto dir = stage_dir(c, "score");
    const auto meta = meta_for(c, "score");

    const auto tasks = read_normalized_tasks(tasks_artifact(c));
    const auto tmpl = rubric::PromptTemplate::load(c.prompt_template_path);

    std::unique_ptr<annot::Backend> backend;
    if (c.backend == "stub") {
        backend = std::make_unique<annot::StubBackend>(c.seed);
    } else if (c.backend == "http") {
        const char* key = std::getenv(c.annotator.api_key_env.c_str());
        if (key == nullptr || key[0] == '\0')
            std::cout << "score: warning: " << c.annotator.api_key_env
                      << " is not set; requests will carry no bearer token\n";
        backend = std::make_unique<annot::HttpBackend>(c.annotator);
    } else {
        throw StageError(1, "backend must be stub|http, got '" + c.backend + "'");
    }

    annot::CheckpointStore checkpoint(dir + "/annotations.jsonl", meta.jsonl_line());

    const std::string flags_path = dir + "/audit_flags.jsonl";
    if (!fs::exists(flags_path)) {
        std::ofstream f(flags_path, std::ios::binary);
        f << meta.jsonl_line() << "\n";
    }
    std::ofstream flags_out(flags_path, std::ios::binary | std::ios::app);

    annot::BatchOptions options;
    options.cancel = cancel;
    std::size_t done = 0;
    options.on_outcome = [&](const annot::RequestOutcome& o) {
        ++done;
        if (done % 500 == 0)
            std::cout << "score: " << done << " outcomes (last " << o.soc_code << "/"
                      << o.task_id << ")\n";
    };

    const auto report = annot::annotate_batch(tasks, tmpl, c.annotator, checkpoint,
                                              *backend, options);

    for (const auto& f : report.flags) flags_out << rubric::to_json(f).dump() << "\n";
    flags_out.flush();

    std::ofstream failures(dir + "/failures.jsonl", std::ios::binary);
    failures << meta.jsonl_line() << "\n";
    for (const auto& o : report.outcomes) {
        if (o.status != annot::OutcomeStatus::failed) continue;
        failures << json{{"soc_code", o.soc_code},
                         {"task_id", o.task_id},
                         {"attempts", o.attempts},
                         {"error", o.error}}
                        .dump()
                 << "\n";
    }

    json rep{{"tasks", tasks.size()},
             {"ok", report.n_ok},
             {"retried_ok", report.n_retried_ok},
             {"failed", report.n_failed},
             {"skipped_checkpointed", report.n_skipped},
             {"flags", report.flags.size()},
             {"backend", c.backend},
             {"model", c.annotator.model_name}};
    artifacts::write_json(dir + "/score_report.json", rep, meta);

    std::cout << "score: ok=" << report.n_ok << " retried_ok=" << report.n_retried_ok
              << " failed=" << report.n_failed << " skipped=" << report.n_skipped << "\n";
    if (cancel && cancel->load())
        std::cout << "score: interrupted; rerun to resume from the checkpoint\n";
}

void run_index(const cfg::RunConfig& c) {
    require_artifact(tasks_artifact(c), "ingest");
    const std::string ann_path = fs::path(c.out_dir) / "score" / "annotations.jsonl";
    require_artifact(ann_path, "score");
    const auto dir = stage_dir(c, "index");
    const auto meta = meta_for(c, "index");

    const auto tasks = read_normalized_tasks(tasks_artifact(c));
    const auto annotations = annot::CheckpointStore::read_annotations(ann_path);
    if (annotations.empty())
        throw StageError(3, "no annotations found in " + ann_path);

    std::vector<idx::TaskScore> scores;
    scores.reserve(annotations.size());
    for (const auto& a : annotations) scores.push_back(idx::compute_task_index(a));

    std::vector<std::string> warnings;
    const auto occs = idx::aggregate_occupation(scores, tasks, &warnings);
    const auto summary = idx::summarize(scores, occs, c.top_k);

    idx::write_task_scores_csv(dir + "/task_scores.csv", scores, meta.csv_comment());
    idx::write_occupation_csv(dir + "/occupation_index.csv", occs, meta.csv_comment());
    idx::write_dimension_stats_csv(dir + "/dimension_stats.csv", summary.dimensions,
                                   meta.csv_comment());
    json sj = idx::to_json(summary);
    sj["equal_weight_warnings"] = warnings;
    artifacts::write_json(dir + "/summary.json", sj, meta);

    std::cout << "index: " << scores.size() << " task scores, " << occs.size()
              << " occupations (task mean " << csv::format_double(summary.task.mean)
              << ", occupation mean " << csv::format_double(summary.occupation.mean)
              << ")\n";
}

void run_factor(const cfg::RunConfig& c) {
    const std::string scores_path = fs::path(c.out_dir) / "index" / "task_scores.csv";
    require_artifact(scores_path, "index");
    const auto dir = stage_dir(c, "factor");
    const auto meta = meta_for(c, "factor");

    const auto scores = idx::read_task_scores_csv(scores_path);
    const auto matrix = factor::gate_passing_matrix(scores);
    const auto corr = factor::dimension_correlations(matrix);
    const auto p = factor::pca(corr, matrix);
    const auto pa = factor::parallel_analysis(p.eigenvalues,
                                              static_cast<int>(matrix.values.rows()),
                                              kNumDimensions, c.parallel_sims, c.seed);
    const double alpha = factor::cronbach_alpha(matrix);

    factor::write_corr_csv(dir + "/corr_matrix.csv", corr, meta.csv_comment());
    json pj = factor::pca_to_json(p);
    pj["cronbach_alpha"] = alpha;
    pj["n_tasks"] = matrix.values.rows();
    artifacts::write_json(dir + "/pca.json", pj, meta);
    artifacts::write_json(dir + "/parallel.json", factor::parallel_to_json(pa, p.eigenvalues),
                          meta);
    factor::write_biplot_csv(dir + "/biplot_points.csv", matrix, p, meta.csv_comment());

    std::cout << "factor: PC1 eigenvalue " << csv::format_double(p.eigenvalues(0)) << " ("
              << csv::format_double(p.explained_pct(0)) << "% explained), alpha "
              << csv::format_double(alpha) << ", retained {";
    bool first = true;
    for (int k : pa.retained) {
        if (!first) std::cout << ",";
        std::cout << "PC" << k;
        first = false;
    }
    std::cout << "}\n";
}

void run_compare(const cfg::RunConfig& c) {
    const std::string scores_path = fs::path(c.out_dir) / "index" / "task_scores.csv";
    require_artifact(scores_path, "index");
    require_artifact(tasks_artifact(c), "ingest");
    require_input(c.beta_path, "beta");
    const auto dir = stage_dir(c, "compare");
    const auto meta = meta_for(c, "compare");

    const auto scores = idx::read_task_scores_csv(scores_path);
    const auto tasks = read_normalized_tasks(tasks_artifact(c));
    const auto beta = ingest::load_beta(c.beta_path, c.delimiter_char());
    if (!beta.rejects.empty())
        ingest::write_rejects_jsonl(dir + "/beta_rejects.jsonl", beta.rejects,
                                    meta.jsonl_line());
    if (beta.records.empty())
        throw StageError(3, "no valid beta records in " + c.beta_path);

    const auto occs = idx::aggregate_occupation(scores, tasks);
    const auto join = cmp::aggregate_beta(beta.records, tasks);
    const auto rows = cmp::build_rows(occs, join);
    if (rows.size() < 4)
        throw StageError(3, "fewer than 4 joined occupations; cannot compare");

    const auto corr_all = cmp::correlations(rows);
    cmp::BetaJoin gate_join;
    const auto gate_rows = cmp::build_rows_gate_passing(scores, tasks, beta.records,
                                                        &gate_join);
    std::optional<cmp::CorrelationResult> corr_gate;
    if (gate_rows.size() >= 3) corr_gate = cmp::correlations(gate_rows);

    const auto exemplars = cmp::quadrant_exemplars(rows, c.top_k);
    const auto div = cmp::divergence(rows, c.top_k);

    cmp::write_comparison_csv(dir + "/comparison.csv", rows, meta.csv_comment());
    artifacts::write_json(dir + "/quadrant_exemplars.json", cmp::exemplars_to_json(exemplars),
                          meta);
    artifacts::write_json(dir + "/divergence_top.json", cmp::divergence_to_json(div), meta);
    cmp::write_scatter_csv(dir + "/scatter_points.csv", rows, meta.csv_comment());

    json rep{{"n_occupations", rows.size()},
             {"pearson_all", corr_all.pearson},
             {"spearman_all", corr_all.spearman},
             {"matched_tasks", join.matched_tasks},
             {"unmatched_beta_rows", join.unmatched_beta},
             {"unmatched_tasks", join.unmatched_tasks},
             {"excluded_occupations", join.excluded_occupations.size()}};
    if (corr_gate) {
        rep["gate_passing"] = {{"n_occupations", gate_rows.size()},
                               {"pearson", corr_gate->pearson},
                               {"spearman", corr_gate->spearman},
                               {"matched_tasks", gate_join.matched_tasks}};
    }
    artifacts::write_json(dir + "/compare_report.json", rep, meta);

    std::cout << "compare: n=" << rows.size() << " pearson="
              << csv::format_double(corr_all.pearson);
    if (corr_gate)
        std::cout << " gate-passing pearson=" << csv::format_double(corr_gate->pearson)
                  << " (n=" << gate_rows.size() << ")";
    std::cout << "\n";
}

void run_econ(const cfg::RunConfig& c) {
    const std::string occ_path = fs::path(c.out_dir) / "index" / "occupation_index.csv";
    require_artifact(occ_path, "index");
    if (c.profiles_path.empty() && c.panel_path.empty())
        throw StageError(1, "econ needs profiles_path and/or panel_path configured");
    const auto dir = stage_dir(c, "econ");
    const auto meta = meta_for(c, "econ");

    const auto occs = idx::read_occupation_csv(occ_path);
    json report;

    if (!c.profiles_path.empty()) {
        require_input(c.profiles_path, "profiles");
        const auto profiles = ingest::load_profiles(c.profiles_path, c.delimiter_char());
        if (!profiles.rejects.empty())
            ingest::write_rejects_jsonl(dir + "/profile_rejects.jsonl", profiles.rejects,
                                        meta.jsonl_line());

        std::map<std::string, const OccupationProfile*> by_soc;
        for (const auto& p : profiles.records) by_soc[p.soc_code] = &p;

        econ::Dataset d;
        std::vector<std::string> dropped;
        for (const auto& o : occs) {
            auto it = by_soc.find(o.soc_code);
            if (it == by_soc.end()) {
                dropped.push_back(o.soc_code);
                continue;
            }
            d.num["rl_weighted"].push_back(o.rl_weighted);
            d.num["log_mean_salary"].push_back(it->second->mean_log_salary);
            d.num["mean_seniority"].push_back(it->second->mean_seniority);
            d.num["mean_seniority_sq"].push_back(it->second->mean_seniority *
                                                 it->second->mean_seniority);
            d.cat["soc_major"].push_back(o.soc_major);
        }
        if (d.rows() < 10) throw StageError(3, "too few joined occupations for regression");

        econ::RegressionSpec base;
        base.outcome = "rl_weighted";
        base.regressors = {"log_mean_salary", "mean_seniority", "mean_seniority_sq"};
        const auto ols_res = econ::ols(base, d);

        econ::RegressionSpec fe = base;
        fe.fixed_effects = {{{"soc_major"}}};
        const auto fe_res = econ::ols(fe, d);

        econ::write_regression_csv(dir + "/wage_regression_ols.csv", ols_res,
                                   meta.csv_comment());
        econ::write_regression_csv(dir + "/wage_regression_fe.csv", fe_res,
                                   meta.csv_comment());
        artifacts::write_json(dir + "/wage_regression_ols.json",
                              econ::regression_to_json(ols_res), meta);
        artifacts::write_json(dir + "/wage_regression_fe.json",
                              econ::regression_to_json(fe_res), meta);

        report["wage"] = {{"n_obs", ols_res.n_obs},
                          {"r2_ols", ols_res.r2},
                          {"r2_fe", fe_res.r2},
                          {"implied_peak_ols",
                           econ::implied_peak(ols_res, "mean_seniority", "mean_seniority_sq")},
                          {"implied_peak_fe",
                           econ::implied_peak(fe_res, "mean_seniority", "mean_seniority_sq")},
                          {"dropped_occupations", dropped}};
        std::cout << "econ: wage regression n=" << ols_res.n_obs << " R2="
                  << csv::format_double(ols_res.r2)
                  << " (FE R2=" << csv::format_double(fe_res.r2) << ")\n";
    }

    if (!c.panel_path.empty()) {
        require_input(c.panel_path, "panel");
        const auto panel_load = ingest::load_panel(c.panel_path, c.window(),
                                                   c.delimiter_char());
        if (!panel_load.rejects.empty())
            ingest::write_rejects_jsonl(dir + "/panel_rejects.jsonl", panel_load.rejects,
                                        meta.jsonl_line());
        const auto balanced = econ::balance_panel(panel_load.records);
        if (balanced.observations.empty())
            throw StageError(3, "balanced panel is empty");

        std::map<std::string, double> exposure;
        for (const auto& o : occs) exposure[o.soc_code] = o.rl_weighted;

        const auto did_res = econ::did(balanced, exposure, c.did_cutoff);
        const auto es = econ::event_study(balanced, exposure, c.event_reference);

        econ::write_regression_csv(dir + "/did.csv", did_res.regression, meta.csv_comment());
        artifacts::write_json(dir + "/did.json", econ::regression_to_json(did_res.regression),
                              meta);
        econ::write_event_study_csv(dir + "/event_study.csv", es, meta.csv_comment());

        report["did"] = {{"n_obs", did_res.regression.n_obs},
                         {"n_occupations", did_res.n_occupations},
                         {"n_periods", balanced.periods.size()},
                         {"delta", did_res.regression.coef(0)},
                         {"se", did_res.regression.se(0)},
                         {"dropped_unbalanced", balanced.dropped.size()},
                         {"missing_exposure", did_res.missing_exposure},
                         {"cutoff", c.did_cutoff.str()},
                         {"event_reference", c.event_reference.str()}};
        std::cout << "econ: did delta=" << csv::format_double(did_res.regression.coef(0))
                  << " se=" << csv::format_double(did_res.regression.se(0))
                  << " n=" << did_res.regression.n_obs << " ("
                  << did_res.n_occupations << " occupations x "
                  << balanced.periods.size() << " months)\n";
    }

    artifacts::write_json(dir + "/econ_report.json", report, meta);
}

void run_report(const cfg::RunConfig& c, bool force) {
    const auto dir = stage_dir(c, "report");
    const auto meta = meta_for(c, "report");
    const std::string expected_hash = meta.config_hash.substr(0, 16);

    const std::vector<std::pair<std::string, std::vector<std::string>>> layout = {
        {"ingest", {"tasks.csv", "rejects.jsonl", "ingest_report.json"}},
        {"score", {"annotations.jsonl", "audit_flags.jsonl", "score_report.json"}},
        {"index",
         {"task_scores.csv", "occupation_index.csv", "dimension_stats.csv", "summary.json"}},
        {"factor", {"pca.json", "parallel.json", "corr_matrix.csv", "biplot_points.csv"}},
        {"compare",
         {"comparison.csv", "quadrant_exemplars.json", "divergence_top.json",
          "scatter_points.csv", "compare_report.json"}},
        {"econ",
         {"wage_regression_ols.csv", "wage_regression_ols.json", "wage_regression_fe.csv",
          "wage_regression_fe.json", "did.csv", "did.json", "event_study.csv",
          "econ_report.json"}},
    };

    json stages = json::object();
    std::vector<std::string> mismatched;
    for (const auto& [stage, files] : layout) {
        json arr = json::array();
        for (const auto& f : files) {
            const fs::path p = fs::path(c.out_dir) / stage / f;
            if (!fs::exists(p)) continue;
            const auto m = artifacts::read_meta(p.string());
            if (m && !m->config_hash.empty() && m->config_hash != expected_hash)
                mismatched.push_back(p.string() + " (config " + m->config_hash + ")");
            arr.push_back({{"name", f},
                           {"path", p.string()},
                           {"sha256", artifacts::sha256_file(p.string())},
                           {"bytes", fs::file_size(p)}});
        }
        if (!arr.empty()) stages[stage] = arr;
    }
    if (!mismatched.empty() && !force) {
        std::string msg = "artifacts were produced under a different config:";
        for (const auto& m : mismatched) msg += "\n  " + m;
        throw StageError(1, msg + "\n(re-run the stages or pass --force)");
    }

    json inputs = json::object();
    for (const auto& [name, path] :
         {std::pair{"tasks", c.tasks_path}, {"importance", c.importance_path},
          {"beta", c.beta_path}, {"panel", c.panel_path}, {"profiles", c.profiles_path}}) {
        if (!path.empty() && fs::exists(path))
            inputs[name] = {{"path", path}, {"sha256", artifacts::sha256_file(path)}};
    }

    const auto now = std::chrono::system_clock::now();
    json manifest{{"tool", "rlfi"},
                  {"version", RLFI_VERSION},
                  {"config_hash", expected_hash},
                  {"config", c.canonical()},
                  {"seed", c.seed},
                  {"generated_at_unix",
                   std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
                       .count()},
                  {"inputs", inputs},
                  {"stages", stages},
                  {"forced", force}};
    artifacts::write_json(dir + "/manifest.json", manifest, meta);
    std::cout << "report: manifest covers " << stages.size() << " stages -> " << dir
              << "/manifest.json\n";
}

}  // namespace rlfi::pipeline
