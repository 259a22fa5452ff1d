#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "rlfi/rubric.hpp"
#include "rlfi/types.hpp"

namespace rlfi::annot {

struct AnnotatorConfig {
    std::string model_name = "google/gemini-2.5-flash";
    double temperature = 0.0;
    int max_output_tokens = 4000;
    std::string reasoning_effort = "medium";  // low | medium | high
    int max_in_flight = 50;
    int max_retries = 3;
    double request_timeout_s = 120.0;
    std::string base_url = "https://openrouter.ai/api/v1";
    std::string api_key_env = "OPENROUTER_API_KEY";
    double jitter = 0.0;  // multiplicative backoff jitter, off by default

    void validate() const;  // throws on max_in_flight < 1, max_retries < 0, timeout <= 0
};

enum class OutcomeStatus { ok, retried_ok, failed };

const char* to_string(OutcomeStatus s);

struct RequestOutcome {
    std::string soc_code;
    std::int64_t task_id = 0;
    OutcomeStatus status = OutcomeStatus::failed;
    int attempts = 0;
    std::vector<double> latency_s;  // per attempt
    std::string error;              // terminal error on failure
    std::string raw_response;       // populated on success when keep_raw is set
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

// One gateway exchange, transport outcome plus HTTP payload.
struct GatewayReply {
    enum class Transport { ok, timeout, connection_error };
    Transport transport = Transport::connection_error;
    int status = 0;
    std::string body;
    std::optional<double> retry_after_s;
    std::string error;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual GatewayReply complete(const TaskRecord& task, const std::string& prompt) = 0;
    // Deterministic backends run sequentially so checkpoint files are
    // bit-identical across runs.
    virtual bool deterministic() const { return false; }
};

// Chat-completions gateway client. POSTs model/messages/temperature/
// max_tokens/reasoning/response_format; bearer token read from the
// environment variable named in the config.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(AnnotatorConfig config);
    GatewayReply complete(const TaskRecord& task, const std::string& prompt) override;

    static std::string request_body(const AnnotatorConfig& config, const std::string& prompt);
    // Extracts choices[0].message.content; empty optional when malformed.
    static std::optional<std::string> extract_content(const std::string& body,
                                                      std::int64_t* prompt_tokens = nullptr,
                                                      std::int64_t* completion_tokens = nullptr);

private:
    AnnotatorConfig config_;
    std::string host_;   // scheme://host[:port]
    std::string path_;   // /v1/chat/completions etc.
};

// Offline deterministic backend: fabricates a schema-valid response as a
// pure function of (soc_code, task_id, seed).
class StubBackend : public Backend {
public:
    explicit StubBackend(std::uint64_t seed) : seed_(seed) {}
    GatewayReply complete(const TaskRecord& task, const std::string& prompt) override;
    bool deterministic() const override { return true; }

private:
    std::uint64_t seed_;
};

rubric::AnnotationResult stub_annotate(const TaskRecord& task, std::uint64_t seed);

// Append-only JSONL store keyed by (soc_code, task_id); at most one record
// per key. A torn trailing line (crash mid-write) is truncated on open.
class CheckpointStore {
public:
    // meta_line, when non-empty, is written as the first line of a fresh file.
    CheckpointStore(std::string path, std::string meta_line = "");
    ~CheckpointStore();

    bool contains(const std::string& key) const;
    std::size_t size() const;
    // Returns false when the key was already present (no write happens).
    bool append(const rubric::AnnotationResult& result);
    std::vector<rubric::AnnotationResult> load_all() const;

    static std::vector<rubric::AnnotationResult> read_annotations(const std::string& path);

private:
    std::string path_;
    mutable std::mutex mu_;
    std::unordered_set<std::string> keys_;
    int fd_ = -1;
};

struct BatchReport {
    std::size_t n_ok = 0;
    std::size_t n_retried_ok = 0;
    std::size_t n_failed = 0;
    std::size_t n_skipped = 0;  // already checkpointed
    std::vector<RequestOutcome> outcomes;
    std::vector<rubric::AuditFlag> flags;
};

struct BatchOptions {
    bool keep_raw = false;
    const std::atomic<bool>* cancel = nullptr;
    // Invoked after each terminal outcome (progress reporting).
    std::function<void(const RequestOutcome&)> on_outcome;
    // Test hook: scales retry sleeps; 1.0 = protocol timing.
    double backoff_scale = 1.0;
};

// Dispatches every not-yet-checkpointed task exactly once, bounded by
// config.max_in_flight concurrent requests. Retry protocol: 408/429/5xx,
// timeouts, connection drops and unparseable bodies are retryable up to
// max_retries with 2^attempt-second backoff; HTTP 429 honors Retry-After.
// Other 4xx fail immediately. Results stream to the checkpoint in
// completion order.
BatchReport annotate_batch(const std::vector<TaskRecord>& tasks,
                           const rubric::PromptTemplate& tmpl, const AnnotatorConfig& config,
                           CheckpointStore& checkpoint, Backend& backend,
                           const BatchOptions& options = {});

}  // namespace rlfi::annot
