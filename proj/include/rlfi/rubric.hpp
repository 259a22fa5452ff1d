#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlfi/types.hpp"

namespace rlfi::rubric {

// Scoring prompt with {{OCCUPATION}} and {{TASK}} placeholders, each
// required to occur exactly once.
struct PromptTemplate {
    std::string text;
    std::string version = "4.2";

    static PromptTemplate load(const std::string& path, const std::string& version = "4.2");
    void validate() const;  // throws std::runtime_error when a placeholder is missing/repeated
};

enum class TaskType { generative, analytical, interactive, procedural, hybrid };

const char* to_string(TaskType t);
std::optional<TaskType> task_type_from_string(const std::string& s);

struct TaskReasoning {
    TaskType task_type = TaskType::analytical;
    std::string core_output;
    std::string verification_bottleneck;
    std::string tool_requirements;
    int predicted_binding_constraint = 0;  // 0-based dimension index
};

// Validated three-stage annotation: gate verdict, reasoning, dimension scores.
// Scores are present iff the gate passed; every present score carries a
// non-empty justification.
struct AnnotationResult {
    std::string soc_code;
    std::int64_t task_id = 0;
    bool gate_pass = false;
    std::string gate_justification;
    std::optional<TaskReasoning> task_reasoning;  // present iff gate_pass
    std::array<std::optional<int>, kNumDimensions> dimension_scores;
    std::array<std::string, kNumDimensions> dimension_justifications;

    bool operator==(const AnnotationResult&) const = default;
};

inline bool operator==(const TaskReasoning& a, const TaskReasoning& b) {
    return a.task_type == b.task_type && a.core_output == b.core_output &&
           a.verification_bottleneck == b.verification_bottleneck &&
           a.tool_requirements == b.tool_requirements &&
           a.predicted_binding_constraint == b.predicted_binding_constraint;
}

enum class FlagKind { binding_mismatch, schema_repair, out_of_range };

const char* to_string(FlagKind k);

struct AuditFlag {
    std::string soc_code;
    std::int64_t task_id = 0;
    FlagKind kind = FlagKind::binding_mismatch;
    std::string detail;
};

struct ParsedAnnotation {
    AnnotationResult result;
    std::vector<AuditFlag> flags;
};

// Thrown when a response cannot be validated; carries the raw body for
// retry or inspection.
class AnnotationParseError : public std::runtime_error {
public:
    AnnotationParseError(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

// Substitutes the occupation title and task text into the template in a
// single pass: only the template's own placeholder positions are replaced.
std::string render_prompt(const PromptTemplate& tmpl, const TaskRecord& task);

// Validates a raw model response against the schema. Strips code fences or
// surrounding prose down to the outermost JSON object first. Integer-valued
// floats (7.0) are coerced with a schema_repair flag. Computes the
// binding-constraint audit: a flag is raised iff the predicted dimension is
// not among the minimum-scoring ones. Throws AnnotationParseError.
ParsedAnnotation parse_annotation(const std::string& raw_body, const TaskRecord& task);

// Canonical JSONL serialization for checkpoints / validated annotations.
nlohmann::json to_json(const AnnotationResult& r);
AnnotationResult annotation_from_json(const nlohmann::json& j);

// Renders a result in the response-schema shape a gateway would return
// (used by the offline stub and round-trip tests).
nlohmann::json to_model_json(const AnnotationResult& r, const TaskRecord& task);

nlohmann::json to_json(const AuditFlag& f);

// Recomputes audit flags derivable from a stored result (binding mismatch).
std::vector<AuditFlag> audit_result(const AnnotationResult& r);

}  // namespace rlfi::rubric
