#include "rlfi/annotator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
// glibc's resolv.h (pulled in by httplib) defines _res, which collides with
// Eigen parameter names in translation units that use both.
#ifdef _res
#undef _res
#endif
#include <nlohmann/json.hpp>

#include "rlfi/stats.hpp"

namespace rlfi::annot {

using nlohmann::json;

void AnnotatorConfig::validate() const {
    if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
    if (request_timeout_s <= 0.0) throw std::invalid_argument("request_timeout must be > 0");
    if (reasoning_effort != "low" && reasoning_effort != "medium" &&
        reasoning_effort != "high")
        throw std::invalid_argument("reasoning_effort must be low|medium|high");
}

const char* to_string(OutcomeStatus s) {
    switch (s) {
        case OutcomeStatus::ok: return "ok";
        case OutcomeStatus::retried_ok: return "retried_ok";
        case OutcomeStatus::failed: return "failed";
    }
    return "failed";
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpBackend::HttpBackend(AnnotatorConfig config) : config_(std::move(config)) {
    config_.validate();
    const std::string& url = config_.base_url;
    const std::size_t scheme_end = url.find("://");
    std::size_t path_start = std::string::npos;
    if (scheme_end != std::string::npos)
        path_start = url.find('/', scheme_end + 3);
    else
        path_start = url.find('/');
    if (path_start == std::string::npos) {
        host_ = url;
        path_ = "";
    } else {
        host_ = url.substr(0, path_start);
        path_ = url.substr(path_start);
    }
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
}

std::string HttpBackend::request_body(const AnnotatorConfig& config,
                                      const std::string& prompt) {
    json body{{"model", config.model_name},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
              {"temperature", config.temperature},
              {"max_tokens", config.max_output_tokens},
              {"reasoning", {{"effort", config.reasoning_effort}}},
              {"response_format", {{"type", "json_object"}}}};
    return body.dump();
}

std::optional<std::string> HttpBackend::extract_content(const std::string& body,
                                                        std::int64_t* prompt_tokens,
                                                        std::int64_t* completion_tokens) {
    json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        return std::nullopt;
    const auto& msg = j["choices"][0];
    if (!msg.contains("message") || !msg["message"].contains("content") ||
        !msg["message"]["content"].is_string())
        return std::nullopt;
    if (j.contains("usage") && j["usage"].is_object()) {
        const auto& u = j["usage"];
        if (prompt_tokens && u.contains("prompt_tokens") && u["prompt_tokens"].is_number())
            *prompt_tokens = u["prompt_tokens"].get<std::int64_t>();
        if (completion_tokens && u.contains("completion_tokens") &&
            u["completion_tokens"].is_number())
            *completion_tokens = u["completion_tokens"].get<std::int64_t>();
    }
    return msg["message"]["content"].get<std::string>();
}

GatewayReply HttpBackend::complete(const TaskRecord&, const std::string& prompt) {
    GatewayReply reply;
    httplib::Client client(host_);
    const auto timeout_us =
        static_cast<time_t>(config_.request_timeout_s * 1e6);
    client.set_connection_timeout(0, std::min<time_t>(timeout_us, 30'000'000));
    client.set_read_timeout(timeout_us / 1'000'000, timeout_us % 1'000'000);
    client.set_write_timeout(timeout_us / 1'000'000, timeout_us % 1'000'000);
    client.set_follow_location(true);

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str());
        key != nullptr && key[0] != '\0')
        headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = client.Post(path_, headers, request_body(config_, prompt),
                           "application/json");
    if (!res) {
        const auto err = res.error();
        reply.transport = (err == httplib::Error::ConnectionTimeout ||
                           err == httplib::Error::Read || err == httplib::Error::Write)
                              ? GatewayReply::Transport::timeout
                              : GatewayReply::Transport::connection_error;
        reply.error = httplib::to_string(err);
        return reply;
    }
    reply.transport = GatewayReply::Transport::ok;
    reply.status = res->status;
    reply.body = res->body;
    if (res->has_header("Retry-After")) {
        const std::string v = res->get_header_value("Retry-After");
        char* end = nullptr;
        const double seconds = std::strtod(v.c_str(), &end);
        if (end && *end == '\0' && seconds >= 0.0) reply.retry_after_s = seconds;
    }
    return reply;
}

// ---------------------------------------------------------------------------
// Deterministic stub

namespace {

// Verbs that mark a task as requiring physical embodiment in the stub's
// gate heuristic.
const std::vector<std::string> kPhysicalHints = {
    "install", "repair",  "clean",  "operate", "lift",  "drive", "assemble",
    "weld",    "paint",   "dig",    "harvest", "cook",  "wash",  "load",
    "carry",   "climb",   "drill",  "cut",     "plant", "move",  "build"};

bool looks_physical(const std::string& text) {
    std::string lower = text;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto& hint : kPhysicalHints)
        if (lower.find(hint) != std::string::npos) return true;
    return false;
}

}  // namespace

rubric::AnnotationResult stub_annotate(const TaskRecord& task, std::uint64_t seed) {
    rubric::AnnotationResult r;
    r.soc_code = task.soc_code;
    r.task_id = task.task_id;

    stats::Rng rng(stats::fnv1a64(task.key()) ^ (seed * 0x9E3779B97F4A7C15ULL));
    const bool physical = looks_physical(task.task_text) || rng.next_int(0, 9) == 0;

    if (physical) {
        r.gate_pass = false;
        r.gate_justification = "The task centers on physical manipulation that has no "
                               "digital counterpart, so no software environment can host it.";
        return r;
    }

    r.gate_pass = true;
    r.gate_justification = "The task is carried out through digital records and text, "
                           "so it can be performed entirely in software.";
    rubric::TaskReasoning reasoning;
    const auto types = {rubric::TaskType::generative, rubric::TaskType::analytical,
                        rubric::TaskType::interactive, rubric::TaskType::procedural,
                        rubric::TaskType::hybrid};
    reasoning.task_type = *(types.begin() + rng.next_int(0, 4));
    reasoning.core_output = "A structured digital artifact for task " +
                            std::to_string(task.task_id) + ".";
    reasoning.verification_bottleneck = "Grading depends on comparing the artifact "
                                        "against source records.";
    reasoning.tool_requirements = "Standard text and data interfaces.";

    int min_score = 11, argmin = 0;
    for (int d = 0; d < kNumDimensions; ++d) {
        const int score = static_cast<int>(rng.next_int(1, 10));
        const auto idx = static_cast<std::size_t>(d);
        r.dimension_scores[idx] = score;
        r.dimension_justifications[idx] =
            "Score reflects how instance " + std::to_string(task.task_id) +
            " behaves on " + dimension_label(d) + " under the occupation context.";
        if (score < min_score) {
            min_score = score;
            argmin = d;
        }
    }
    reasoning.predicted_binding_constraint = argmin;
    r.task_reasoning = reasoning;
    return r;
}

GatewayReply StubBackend::complete(const TaskRecord& task, const std::string&) {
    const auto result = stub_annotate(task, seed_);
    const std::string content = rubric::to_model_json(result, task).dump();
    json envelope{{"choices", json::array({json{
                      {"message", {{"role", "assistant"}, {"content", content}}}}})},
                  {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}}};
    GatewayReply reply;
    reply.transport = GatewayReply::Transport::ok;
    reply.status = 200;
    reply.body = envelope.dump();
    return reply;
}

// ---------------------------------------------------------------------------
// Checkpoint store

CheckpointStore::CheckpointStore(std::string path, std::string meta_line)
    : path_(std::move(path)) {
    namespace fs = std::filesystem;
    if (fs::exists(path_)) {
        // Load keys; truncate a torn trailing line so appends stay well formed.
        std::ifstream in(path_, std::ios::binary);
        std::string line;
        std::uintmax_t good_end = 0;
        std::uintmax_t pos = 0;
        while (std::getline(in, line)) {
            pos += line.size() + 1;
            if (in.eof() && !line.empty()) break;  // no trailing newline: torn
            if (line.empty() || line.front() != '{') continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            if (j.contains("_meta")) {
                good_end = pos;
                continue;
            }
            try {
                const auto r = rubric::annotation_from_json(j);
                keys_.insert(r.soc_code + "|" + std::to_string(r.task_id));
                good_end = pos;
            } catch (const std::exception&) {
                // unreadable record: treat as torn tail
                break;
            }
        }
        in.close();
        if (good_end < fs::file_size(path_)) fs::resize_file(path_, good_end);
    } else {
        if (const auto dir = fs::path(path_).parent_path(); !dir.empty())
            fs::create_directories(dir);
        std::ofstream out(path_, std::ios::binary);
        if (!out) throw std::runtime_error("cannot create checkpoint: " + path_);
        if (!meta_line.empty()) out << meta_line << "\n";
    }
}

CheckpointStore::~CheckpointStore() = default;

bool CheckpointStore::contains(const std::string& key) const {
    std::lock_guard lock(mu_);
    return keys_.count(key) > 0;
}

std::size_t CheckpointStore::size() const {
    std::lock_guard lock(mu_);
    return keys_.size();
}

bool CheckpointStore::append(const rubric::AnnotationResult& result) {
    const std::string key = result.soc_code + "|" + std::to_string(result.task_id);
    std::lock_guard lock(mu_);
    if (!keys_.insert(key).second) return false;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to checkpoint: " + path_);
    out << rubric::to_json(result).dump() << "\n";
    out.flush();
    if (!out) throw std::runtime_error("checkpoint write failed: " + path_);
    return true;
}

std::vector<rubric::AnnotationResult> CheckpointStore::load_all() const {
    return read_annotations(path_);
}

std::vector<rubric::AnnotationResult> CheckpointStore::read_annotations(
    const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open annotations: " + path);
    std::vector<rubric::AnnotationResult> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() != '{') continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || j.contains("_meta")) continue;
        out.push_back(rubric::annotation_from_json(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch dispatch

namespace {

bool retryable_reply(const GatewayReply& reply) {
    if (reply.transport != GatewayReply::Transport::ok) return true;  // timeout / conn drop
    const int s = reply.status;
    return s == 408 || s == 429 || s >= 500;
}

// Sleeps in slices so cancellation stays responsive.
void interruptible_sleep(double seconds, const std::atomic<bool>* cancel) {
    using namespace std::chrono;
    const auto deadline = steady_clock::now() + duration_cast<steady_clock::duration>(
                                                    duration<double>(seconds));
    while (steady_clock::now() < deadline) {
        if (cancel && cancel->load()) return;
        std::this_thread::sleep_for(std::min<steady_clock::duration>(
            milliseconds(50), deadline - steady_clock::now()));
    }
}

}  // namespace

BatchReport annotate_batch(const std::vector<TaskRecord>& tasks,
                           const rubric::PromptTemplate& tmpl, const AnnotatorConfig& config,
                           CheckpointStore& checkpoint, Backend& backend,
                           const BatchOptions& options) {
    config.validate();
    tmpl.validate();

    BatchReport report;
    std::vector<const TaskRecord*> pending;
    pending.reserve(tasks.size());
    {
        std::unordered_set<std::string> batch_keys;
        for (const auto& t : tasks) {
            if (!batch_keys.insert(t.key()).second)
                throw std::invalid_argument("annotate_batch: duplicate task key " + t.key());
            if (checkpoint.contains(t.key()))
                ++report.n_skipped;
            else
                pending.push_back(&t);
        }
    }
    if (pending.empty()) return report;

    std::mutex report_mu;
    std::atomic<std::size_t> next{0};

    auto run_task = [&](const TaskRecord& task) {
        const std::string prompt = rubric::render_prompt(tmpl, task);
        RequestOutcome outcome;
        outcome.soc_code = task.soc_code;
        outcome.task_id = task.task_id;

        const int max_attempts = config.max_retries + 1;
        std::optional<rubric::ParsedAnnotation> parsed;
        stats::Rng jitter_rng(stats::fnv1a64(task.key()) ^ 0x5851F42D4C957F2DULL);

        for (int attempt = 1; attempt <= max_attempts; ++attempt) {
            if (options.cancel && options.cancel->load()) {
                if (outcome.attempts == 0) return;  // never dispatched: stays pending
                outcome.status = OutcomeStatus::failed;
                outcome.error = "cancelled";
                break;
            }
            const auto t0 = std::chrono::steady_clock::now();
            GatewayReply reply = backend.complete(task, prompt);
            const auto t1 = std::chrono::steady_clock::now();
            outcome.latency_s.push_back(std::chrono::duration<double>(t1 - t0).count());
            outcome.attempts = attempt;

            bool retryable = false;
            if (reply.transport == GatewayReply::Transport::ok && reply.status == 200) {
                const auto content = HttpBackend::extract_content(
                    reply.body, &outcome.prompt_tokens, &outcome.completion_tokens);
                if (content) {
                    try {
                        parsed = rubric::parse_annotation(*content, task);
                        outcome.status = attempt == 1 ? OutcomeStatus::ok
                                                      : OutcomeStatus::retried_ok;
                        if (options.keep_raw) outcome.raw_response = reply.body;
                        break;
                    } catch (const rubric::AnnotationParseError& e) {
                        outcome.error = e.what();
                        retryable = true;  // model may produce valid output on retry
                    }
                } else {
                    outcome.error = "malformed gateway envelope";
                    retryable = true;
                }
            } else if (retryable_reply(reply)) {
                outcome.error = reply.transport == GatewayReply::Transport::ok
                                    ? "HTTP " + std::to_string(reply.status)
                                    : reply.error;
                retryable = true;
            } else {
                outcome.error = "HTTP " + std::to_string(reply.status) + " (non-retryable)";
                outcome.status = OutcomeStatus::failed;
                break;
            }

            if (!retryable || attempt == max_attempts) {
                outcome.status = OutcomeStatus::failed;
                break;
            }
            // 2^attempt seconds, overridden by Retry-After on 429.
            double delay = std::pow(2.0, attempt);
            if (reply.transport == GatewayReply::Transport::ok && reply.status == 429 &&
                reply.retry_after_s)
                delay = *reply.retry_after_s;
            if (config.jitter > 0.0)
                delay *= 1.0 + config.jitter * jitter_rng.next_double();
            interruptible_sleep(delay * options.backoff_scale, options.cancel);
        }

        if (parsed) {
            checkpoint.append(parsed->result);
        }
        {
            std::lock_guard lock(report_mu);
            if (parsed) {
                (outcome.status == OutcomeStatus::ok ? report.n_ok : report.n_retried_ok)++;
                for (auto& f : parsed->flags) report.flags.push_back(std::move(f));
            } else {
                ++report.n_failed;
            }
            if (options.on_outcome) options.on_outcome(outcome);
            report.outcomes.push_back(std::move(outcome));
        }
    };

    const std::size_t workers =
        backend.deterministic()
            ? 1
            : std::min<std::size_t>(static_cast<std::size_t>(config.max_in_flight),
                                    pending.size());
    if (workers == 1) {
        for (const auto* t : pending) {
            if (options.cancel && options.cancel->load()) break;
            run_task(*t);
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= pending.size()) return;
                    if (options.cancel && options.cancel->load()) return;
                    run_task(*pending[i]);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return report;
}

}  // namespace rlfi::annot
