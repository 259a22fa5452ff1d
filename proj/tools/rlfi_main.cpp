#include <atomic>
#include <csignal>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rlfi/pipeline.hpp"
#include "rlfi/version.hpp"

namespace {

std::atomic<bool> g_cancel{false};

void handle_sigint(int) { g_cancel.store(true); }

struct Overrides {
    std::optional<std::string> tasks, importance, beta, panel, profiles, tmpl, delimiter;
    std::optional<std::string> out_dir, backend;
    std::optional<std::uint64_t> seed;
    std::optional<int> top_k, parallel_sims;
    std::optional<std::string> panel_start, panel_end, did_cutoff, event_reference;
    std::optional<std::string> model, reasoning_effort, base_url, api_key_env;
    std::optional<double> temperature, timeout, jitter;
    std::optional<int> max_output_tokens, max_in_flight, max_retries;
};

void apply(rlfi::cfg::RunConfig& c, const Overrides& o) {
    using rlfi::cfg::apply_key;
    auto set = [&](const char* key, const auto& opt) {
        if (opt) apply_key(c, key, *opt);
    };
    auto set_num = [&](const char* key, const auto& opt) {
        if (opt) apply_key(c, key, std::to_string(*opt));
    };
    set("tasks_path", o.tasks);
    set("importance_path", o.importance);
    set("beta_path", o.beta);
    set("panel_path", o.panel);
    set("profiles_path", o.profiles);
    set("prompt_template_path", o.tmpl);
    set("delimiter", o.delimiter);
    set("out_dir", o.out_dir);
    set("backend", o.backend);
    set_num("seed", o.seed);
    set_num("top_k", o.top_k);
    set_num("parallel_sims", o.parallel_sims);
    set("panel_start", o.panel_start);
    set("panel_end", o.panel_end);
    set("did_cutoff", o.did_cutoff);
    set("event_reference", o.event_reference);
    set("annotator.model", o.model);
    set("annotator.reasoning_effort", o.reasoning_effort);
    set("annotator.base_url", o.base_url);
    set("annotator.api_key_env", o.api_key_env);
    set_num("annotator.temperature", o.temperature);
    set_num("annotator.request_timeout_s", o.timeout);
    set_num("annotator.jitter", o.jitter);
    set_num("annotator.max_output_tokens", o.max_output_tokens);
    set_num("annotator.max_in_flight", o.max_in_flight);
    set_num("annotator.max_retries", o.max_retries);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rlfi: RL feasibility index toolkit"};
    app.set_version_flag("--version", RLFI_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    Overrides o;
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--out", o.out_dir, "output directory");
    app.add_option("--seed", o.seed, "master seed (stub annotation, simulations)");
    app.add_option("--tasks", o.tasks, "task corpus CSV/TSV");
    app.add_option("--importance", o.importance, "importance ratings CSV/TSV");
    app.add_option("--beta", o.beta, "external beta exposure CSV/TSV");
    app.add_option("--panel", o.panel, "job openings panel CSV/TSV");
    app.add_option("--profiles", o.profiles, "occupation profiles CSV/TSV");
    app.add_option("--template", o.tmpl, "prompt template file");
    app.add_option("--delimiter", o.delimiter, "auto|comma|tab");
    app.add_option("--top-k", o.top_k, "rows in top/bottom/exemplar tables");
    app.add_option("--parallel-sims", o.parallel_sims, "parallel-analysis simulations");
    app.add_option("--panel-start", o.panel_start, "panel window start YYYY-MM");
    app.add_option("--panel-end", o.panel_end, "panel window end YYYY-MM");
    app.add_option("--did-cutoff", o.did_cutoff, "treatment cutoff YYYY-MM");
    app.add_option("--event-reference", o.event_reference, "event-study reference YYYY-MM");

    auto* ingest_cmd = app.add_subcommand("ingest", "parse and normalize the task corpus");
    auto* score_cmd = app.add_subcommand("score", "annotate tasks (stub or HTTP gateway)");
    score_cmd->add_option("--backend", o.backend, "stub|http");
    score_cmd->add_option("--model", o.model, "gateway model name");
    score_cmd->add_option("--temperature", o.temperature, "sampling temperature");
    score_cmd->add_option("--max-output-tokens", o.max_output_tokens, "completion budget");
    score_cmd->add_option("--reasoning-effort", o.reasoning_effort, "low|medium|high");
    score_cmd->add_option("--max-in-flight", o.max_in_flight, "concurrent request bound");
    score_cmd->add_option("--max-retries", o.max_retries, "retries per task");
    score_cmd->add_option("--timeout", o.timeout, "request timeout seconds");
    score_cmd->add_option("--base-url", o.base_url, "chat-completions base URL");
    score_cmd->add_option("--api-key-env", o.api_key_env, "env var holding the bearer token");
    score_cmd->add_option("--jitter", o.jitter, "multiplicative backoff jitter");
    auto* index_cmd = app.add_subcommand("index", "task and occupation indices");
    auto* factor_cmd = app.add_subcommand("factor", "correlations, PCA, parallel analysis");
    auto* compare_cmd = app.add_subcommand("compare", "merge with beta exposure");
    auto* econ_cmd = app.add_subcommand("econ", "regressions, DiD and event study");
    auto* report_cmd = app.add_subcommand("report", "bundle manifest over all artifacts");
    bool force = false;
    report_cmd->add_flag("--force", force, "allow mixing artifacts from different configs");

    CLI11_PARSE(app, argc, argv);

    try {
        rlfi::cfg::RunConfig config;
        if (!config_path.empty()) config = rlfi::cfg::load_config(config_path);
        apply(config, o);

        if (ingest_cmd->parsed()) rlfi::pipeline::run_ingest(config);
        if (score_cmd->parsed()) {
            std::signal(SIGINT, handle_sigint);
            rlfi::pipeline::run_score(config, &g_cancel);
        }
        if (index_cmd->parsed()) rlfi::pipeline::run_index(config);
        if (factor_cmd->parsed()) rlfi::pipeline::run_factor(config);
        if (compare_cmd->parsed()) rlfi::pipeline::run_compare(config);
        if (econ_cmd->parsed()) rlfi::pipeline::run_econ(config);
        if (report_cmd->parsed()) rlfi::pipeline::run_report(config, force);
    } catch (const rlfi::pipeline::StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
