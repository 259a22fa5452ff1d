#include "rlfi/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rlfi/artifacts.hpp"

namespace rlfi::cfg {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        return std::stod(v);
    } catch (...) {
        throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
    }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    try {
        return std::stoll(v);
    } catch (...) {
        throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
    }
}

}  // namespace

char RunConfig::delimiter_char() const {
    if (delimiter == "auto") return '\0';
    if (delimiter == "comma") return ',';
    if (delimiter == "tab") return '\t';
    throw std::invalid_argument("delimiter must be auto|comma|tab");
}

void apply_key(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "tasks_path") c.tasks_path = value;
    else if (key == "importance_path") c.importance_path = value;
    else if (key == "beta_path") c.beta_path = value;
    else if (key == "panel_path") c.panel_path = value;
    else if (key == "profiles_path") c.profiles_path = value;
    else if (key == "prompt_template_path") c.prompt_template_path = value;
    else if (key == "delimiter") c.delimiter = value;
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "top_k") c.top_k = static_cast<int>(to_int(key, value));
    else if (key == "parallel_sims") c.parallel_sims = static_cast<int>(to_int(key, value));
    else if (key == "panel_start") c.panel_start = YearMonth::parse(value);
    else if (key == "panel_end") c.panel_end = YearMonth::parse(value);
    else if (key == "did_cutoff") c.did_cutoff = YearMonth::parse(value);
    else if (key == "event_reference") c.event_reference = YearMonth::parse(value);
    else if (key == "backend") c.backend = value;
    else if (key == "annotator.model") c.annotator.model_name = value;
    else if (key == "annotator.temperature") c.annotator.temperature = to_double(key, value);
    else if (key == "annotator.max_output_tokens")
        c.annotator.max_output_tokens = static_cast<int>(to_int(key, value));
    else if (key == "annotator.reasoning_effort") c.annotator.reasoning_effort = value;
    else if (key == "annotator.max_in_flight")
        c.annotator.max_in_flight = static_cast<int>(to_int(key, value));
    else if (key == "annotator.max_retries")
        c.annotator.max_retries = static_cast<int>(to_int(key, value));
    else if (key == "annotator.request_timeout_s")
        c.annotator.request_timeout_s = to_double(key, value);
    else if (key == "annotator.base_url") c.annotator.base_url = value;
    else if (key == "annotator.api_key_env") c.annotator.api_key_env = value;
    else if (key == "annotator.jitter") c.annotator.jitter = to_double(key, value);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    RunConfig c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected key = value");
        apply_key(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

std::string RunConfig::canonical() const {
    std::map<std::string, std::string> kv;
    kv["tasks_path"] = tasks_path;
    kv["importance_path"] = importance_path;
    kv["beta_path"] = beta_path;
    kv["panel_path"] = panel_path;
    kv["profiles_path"] = profiles_path;
    kv["prompt_template_path"] = prompt_template_path;
    kv["delimiter"] = delimiter;
    kv["out_dir"] = out_dir;
    kv["seed"] = std::to_string(seed);
    kv["top_k"] = std::to_string(top_k);
    kv["parallel_sims"] = std::to_string(parallel_sims);
    kv["panel_start"] = panel_start ? panel_start->str() : "";
    kv["panel_end"] = panel_end ? panel_end->str() : "";
    kv["did_cutoff"] = did_cutoff.str();
    kv["event_reference"] = event_reference.str();
    kv["backend"] = backend;
    kv["annotator.model"] = annotator.model_name;
    kv["annotator.temperature"] = std::to_string(annotator.temperature);
    kv["annotator.max_output_tokens"] = std::to_string(annotator.max_output_tokens);
    kv["annotator.reasoning_effort"] = annotator.reasoning_effort;
    kv["annotator.max_in_flight"] = std::to_string(annotator.max_in_flight);
    kv["annotator.max_retries"] = std::to_string(annotator.max_retries);
    kv["annotator.request_timeout_s"] = std::to_string(annotator.request_timeout_s);
    kv["annotator.base_url"] = annotator.base_url;
    kv["annotator.api_key_env"] = annotator.api_key_env;
    kv["annotator.jitter"] = std::to_string(annotator.jitter);
    std::ostringstream out;
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
    return out.str();
}

std::string config_hash(const RunConfig& config) {
    return artifacts::sha256_hex(config.canonical());
}

}  // namespace rlfi::cfg
