#include "rlfi/rubric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rlfi::rubric {

namespace {

constexpr const char* kOccupationPh = "{{OCCUPATION}}";
constexpr const char* kTaskPh = "{{TASK}}";

// Positions of a placeholder within the template text.
std::vector<std::size_t> find_all(const std::string& text, const std::string& needle) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        out.push_back(pos);
        pos += needle.size();
    }
    return out;
}

}  // namespace

PromptTemplate PromptTemplate::load(const std::string& path, const std::string& version) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open prompt template: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    PromptTemplate t{buf.str(), version};
    t.validate();
    return t;
}

void PromptTemplate::validate() const {
    for (const char* ph : {kOccupationPh, kTaskPh}) {
        const auto hits = find_all(text, ph);
        if (hits.size() != 1)
            throw std::runtime_error(std::string("prompt template must contain placeholder ") +
                                     ph + " exactly once (found " +
                                     std::to_string(hits.size()) + ")");
    }
}

const char* to_string(TaskType t) {
    switch (t) {
        case TaskType::generative: return "generative";
        case TaskType::analytical: return "analytical";
        case TaskType::interactive: return "interactive";
        case TaskType::procedural: return "procedural";
        case TaskType::hybrid: return "hybrid";
    }
    return "analytical";
}

std::optional<TaskType> task_type_from_string(const std::string& s) {
    std::string k = s;
    std::transform(k.begin(), k.end(), k.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (k == "generative") return TaskType::generative;
    if (k == "analytical") return TaskType::analytical;
    if (k == "interactive") return TaskType::interactive;
    if (k == "procedural") return TaskType::procedural;
    if (k == "hybrid") return TaskType::hybrid;
    return std::nullopt;
}

const char* to_string(FlagKind k) {
    switch (k) {
        case FlagKind::binding_mismatch: return "binding_mismatch";
        case FlagKind::schema_repair: return "schema_repair";
        case FlagKind::out_of_range: return "out_of_range";
    }
    return "binding_mismatch";
}

std::string render_prompt(const PromptTemplate& tmpl, const TaskRecord& task) {
    tmpl.validate();
    const std::size_t occ_pos = tmpl.text.find(kOccupationPh);
    const std::size_t task_pos = tmpl.text.find(kTaskPh);

    // Splice both substitutions in template order; substituted values are
    // never rescanned, so placeholder-looking task text stays literal.
    struct Splice {
        std::size_t pos;
        std::size_t len;
        const std::string* value;
    };
    std::vector<Splice> splices = {
        {occ_pos, std::string(kOccupationPh).size(), &task.occupation_title},
        {task_pos, std::string(kTaskPh).size(), &task.task_text}};
    std::sort(splices.begin(), splices.end(),
              [](const Splice& a, const Splice& b) { return a.pos < b.pos; });

    std::string out;
    out.reserve(tmpl.text.size() + task.occupation_title.size() + task.task_text.size());
    std::size_t cursor = 0;
    for (const auto& s : splices) {
        out.append(tmpl.text, cursor, s.pos - cursor);
        out.append(*s.value);
        cursor = s.pos + s.len;
    }
    out.append(tmpl.text, cursor, std::string::npos);
    return out;
}

namespace {

// Strips fences/prose down to the outermost JSON object.
std::string extract_json_object(const std::string& raw) {
    const std::size_t first = raw.find('{');
    const std::size_t last = raw.rfind('}');
    if (first == std::string::npos || last == std::string::npos || last < first)
        return raw;
    return raw.substr(first, last - first + 1);
}

[[noreturn]] void fail(const std::string& msg, const std::string& raw) {
    throw AnnotationParseError(msg, raw);
}

// Accepts an exact integer or an integer-valued float (flagged upstream).
bool json_to_int_score(const nlohmann::json& v, int& out, bool& repaired) {
    if (v.is_number_integer()) {
        out = v.get<int>();
        repaired = false;
        return true;
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == std::floor(d)) {
            out = static_cast<int>(d);
            repaired = true;
            return true;
        }
    }
    return false;
}

std::string require_string(const nlohmann::json& obj, const char* key,
                           const std::string& raw, const std::string& ctx) {
    if (!obj.contains(key) || !obj.at(key).is_string())
        fail("missing or non-string field '" + std::string(key) + "' in " + ctx, raw);
    return obj.at(key).get<std::string>();
}

}  // namespace

ParsedAnnotation parse_annotation(const std::string& raw_body, const TaskRecord& task) {
    nlohmann::json j = nlohmann::json::parse(extract_json_object(raw_body), nullptr,
                                             /*allow_exceptions=*/false);
    if (j.is_discarded()) fail("response is not valid JSON", raw_body);
    if (!j.is_object()) fail("response is not a JSON object", raw_body);

    ParsedAnnotation out;
    AnnotationResult& r = out.result;
    r.soc_code = task.soc_code;
    r.task_id = task.task_id;

    if (!j.contains("physical_feasibility") || !j["physical_feasibility"].is_object())
        fail("missing 'physical_feasibility' object", raw_body);
    const auto& gate = j["physical_feasibility"];
    if (!gate.contains("pass") || !gate["pass"].is_boolean())
        fail("'physical_feasibility.pass' must be a boolean", raw_body);
    r.gate_pass = gate["pass"].get<bool>();
    if (gate.contains("justification") && gate["justification"].is_string())
        r.gate_justification = gate["justification"].get<std::string>();
    else
        fail("missing 'physical_feasibility.justification'", raw_body);

    const bool dims_absent =
        !j.contains("dimensions") || j["dimensions"].is_null() ||
        (j["dimensions"].is_object() &&
         std::all_of(j["dimensions"].begin(), j["dimensions"].end(),
                     [](const nlohmann::json& v) { return v.is_null(); }));

    if (!r.gate_pass) {
        if (!dims_absent)
            fail("gate failed but dimension scores are present", raw_body);
        return out;  // reasoning and scores stay absent
    }

    if (!j.contains("task_reasoning") || !j["task_reasoning"].is_object())
        fail("gate passed but 'task_reasoning' is missing", raw_body);
    const auto& tr = j["task_reasoning"];
    TaskReasoning reasoning;
    const std::string type_s = require_string(tr, "task_type", raw_body, "task_reasoning");
    const auto type = task_type_from_string(type_s);
    if (!type) fail("unknown task_type '" + type_s + "'", raw_body);
    reasoning.task_type = *type;
    reasoning.core_output = require_string(tr, "core_output", raw_body, "task_reasoning");
    reasoning.verification_bottleneck =
        require_string(tr, "verification_bottleneck", raw_body, "task_reasoning");
    reasoning.tool_requirements =
        require_string(tr, "tool_requirements", raw_body, "task_reasoning");
    const std::string binding =
        require_string(tr, "binding_constraint", raw_body, "task_reasoning");
    reasoning.predicted_binding_constraint = canonical_dimension(binding);
    if (reasoning.predicted_binding_constraint < 0)
        fail("unrecognized binding_constraint '" + binding + "'", raw_body);
    r.task_reasoning = reasoning;

    if (dims_absent) fail("gate passed but dimension scores are missing", raw_body);
    if (!j["dimensions"].is_object()) fail("'dimensions' must be an object", raw_body);

    std::array<bool, kNumDimensions> present{};
    for (const auto& [key, value] : j["dimensions"].items()) {
        const int d = canonical_dimension(key);
        if (d < 0) fail("unrecognized dimension key '" + key + "'", raw_body);
        if (present[static_cast<std::size_t>(d)])
            fail("dimension " + dimension_label(d) + " given twice", raw_body);
        present[static_cast<std::size_t>(d)] = true;
        if (!value.is_object())
            fail("dimension " + dimension_label(d) + " must be an object", raw_body);
        if (!value.contains("score"))
            fail("dimension " + dimension_label(d) + " missing score", raw_body);
        int score = 0;
        bool repaired = false;
        if (!json_to_int_score(value["score"], score, repaired))
            fail("dimension " + dimension_label(d) + " score is not an integer", raw_body);
        if (score < 1 || score > 10)
            fail("dimension " + dimension_label(d) + " score " + std::to_string(score) +
                     " outside [1,10]",
                 raw_body);
        const std::string just = require_string(value, "justification", raw_body,
                                                "dimension " + dimension_label(d));
        if (just.empty())
            fail("dimension " + dimension_label(d) + " has empty justification", raw_body);
        if (repaired)
            out.flags.push_back({task.soc_code, task.task_id, FlagKind::schema_repair,
                                 "non-integer score coerced for " + dimension_label(d)});
        r.dimension_scores[static_cast<std::size_t>(d)] = score;
        r.dimension_justifications[static_cast<std::size_t>(d)] = just;
    }
    for (int d = 0; d < kNumDimensions; ++d)
        if (!present[static_cast<std::size_t>(d)])
            fail("gate passed but dimension " + dimension_label(d) + " is missing", raw_body);

    for (auto& f : audit_result(r)) out.flags.push_back(std::move(f));
    return out;
}

std::vector<AuditFlag> audit_result(const AnnotationResult& r) {
    std::vector<AuditFlag> flags;
    if (!r.gate_pass || !r.task_reasoning) return flags;
    int min_score = 11;
    for (const auto& s : r.dimension_scores)
        if (s && *s < min_score) min_score = *s;
    const int predicted = r.task_reasoning->predicted_binding_constraint;
    const auto& predicted_score = r.dimension_scores[static_cast<std::size_t>(predicted)];
    // Weak argmin: the prediction is consistent when it ties the minimum.
    if (predicted_score && *predicted_score != min_score) {
        int argmin = 0;
        for (int d = 0; d < kNumDimensions; ++d)
            if (r.dimension_scores[static_cast<std::size_t>(d)] &&
                *r.dimension_scores[static_cast<std::size_t>(d)] == min_score) {
                argmin = d;
                break;
            }
        flags.push_back({r.soc_code, r.task_id, FlagKind::binding_mismatch,
                         "predicted " + dimension_label(predicted) + " (score " +
                             std::to_string(*predicted_score) + "), minimum is " +
                             dimension_label(argmin) + " (score " +
                             std::to_string(min_score) + ")"});
    }
    return flags;
}

nlohmann::json to_json(const AnnotationResult& r) {
    nlohmann::json j{{"soc_code", r.soc_code},
                     {"task_id", r.task_id},
                     {"gate_pass", r.gate_pass},
                     {"gate_justification", r.gate_justification}};
    if (r.task_reasoning) {
        j["task_reasoning"] = {
            {"task_type", to_string(r.task_reasoning->task_type)},
            {"core_output", r.task_reasoning->core_output},
            {"verification_bottleneck", r.task_reasoning->verification_bottleneck},
            {"tool_requirements", r.task_reasoning->tool_requirements},
            {"binding_constraint",
             dimension_label(r.task_reasoning->predicted_binding_constraint)}};
    }
    if (r.gate_pass) {
        nlohmann::json dims = nlohmann::json::object();
        for (int d = 0; d < kNumDimensions; ++d) {
            const auto idx = static_cast<std::size_t>(d);
            if (r.dimension_scores[idx])
                dims[dimension_label(d)] = {{"score", *r.dimension_scores[idx]},
                                            {"justification", r.dimension_justifications[idx]}};
        }
        j["dimensions"] = dims;
    }
    return j;
}

AnnotationResult annotation_from_json(const nlohmann::json& j) {
    AnnotationResult r;
    r.soc_code = j.at("soc_code").get<std::string>();
    r.task_id = j.at("task_id").get<std::int64_t>();
    r.gate_pass = j.at("gate_pass").get<bool>();
    r.gate_justification = j.value("gate_justification", std::string{});
    if (j.contains("task_reasoning")) {
        const auto& tr = j.at("task_reasoning");
        TaskReasoning reasoning;
        const auto type = task_type_from_string(tr.at("task_type").get<std::string>());
        if (!type) throw std::runtime_error("bad task_type in stored annotation");
        reasoning.task_type = *type;
        reasoning.core_output = tr.at("core_output").get<std::string>();
        reasoning.verification_bottleneck = tr.at("verification_bottleneck").get<std::string>();
        reasoning.tool_requirements = tr.at("tool_requirements").get<std::string>();
        reasoning.predicted_binding_constraint =
            canonical_dimension(tr.at("binding_constraint").get<std::string>());
        if (reasoning.predicted_binding_constraint < 0)
            throw std::runtime_error("bad binding_constraint in stored annotation");
        r.task_reasoning = reasoning;
    }
    if (j.contains("dimensions")) {
        for (const auto& [key, value] : j.at("dimensions").items()) {
            const int d = canonical_dimension(key);
            if (d < 0) throw std::runtime_error("bad dimension key in stored annotation");
            const auto idx = static_cast<std::size_t>(d);
            r.dimension_scores[idx] = value.at("score").get<int>();
            r.dimension_justifications[idx] = value.at("justification").get<std::string>();
        }
    }
    if (!r.gate_pass)
        for (const auto& s : r.dimension_scores)
            if (s) throw std::runtime_error("stored annotation has gate_pass=false with scores");
    return r;
}

nlohmann::json to_model_json(const AnnotationResult& r, const TaskRecord& task) {
    nlohmann::json j{{"occupation", task.occupation_title},
                     {"task", task.task_text},
                     {"physical_feasibility",
                      {{"justification", r.gate_justification}, {"pass", r.gate_pass}}}};
    if (r.task_reasoning) {
        j["task_reasoning"] = {
            {"task_type", to_string(r.task_reasoning->task_type)},
            {"core_output", r.task_reasoning->core_output},
            {"verification_bottleneck", r.task_reasoning->verification_bottleneck},
            {"tool_requirements", r.task_reasoning->tool_requirements},
            {"binding_constraint",
             dimension_label(r.task_reasoning->predicted_binding_constraint)}};
    }
    if (r.gate_pass) {
        nlohmann::json dims = nlohmann::json::object();
        for (int d = 0; d < kNumDimensions; ++d) {
            const auto idx = static_cast<std::size_t>(d);
            dims[dimension_label(d)] = {{"justification", r.dimension_justifications[idx]},
                                        {"score", *r.dimension_scores[idx]}};
        }
        j["dimensions"] = dims;
    } else {
        j["dimensions"] = nullptr;
    }
    return j;
}

nlohmann::json to_json(const AuditFlag& f) {
    return nlohmann::json{{"soc_code", f.soc_code},
                          {"task_id", f.task_id},
                          {"kind", to_string(f.kind)},
                          {"detail", f.detail}};
}

}  // namespace rlfi::rubric
