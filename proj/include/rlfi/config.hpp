#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "rlfi/annotator.hpp"
#include "rlfi/types.hpp"

namespace rlfi::cfg {

// Resolved pipeline configuration; mirrors the key=value config file.
struct RunConfig {
    // inputs
    std::string tasks_path;
    std::string importance_path;
    std::string beta_path;
    std::string panel_path;
    std::string profiles_path;
    std::string prompt_template_path = "data/prompt_v4.2.txt";
    std::string delimiter = "auto";  // auto | comma | tab

    // outputs
    std::string out_dir = "out";

    // analysis parameters
    std::uint64_t seed = 20240101;
    int top_k = 10;
    int parallel_sims = 1000;
    std::optional<YearMonth> panel_start;
    std::optional<YearMonth> panel_end;
    YearMonth did_cutoff{2022, 11};
    YearMonth event_reference{2022, 10};

    // annotation
    std::string backend = "stub";  // stub | http
    annot::AnnotatorConfig annotator;

    char delimiter_char() const;  // '\0' for auto
    PeriodWindow window() const { return {panel_start, panel_end}; }

    // Canonical sorted key=value serialization; hashing input.
    std::string canonical() const;
};

// Parses "key = value" lines; '#' starts a comment. Unknown keys are an
// error so typos surface early.
RunConfig load_config(const std::string& path);
void apply_key(RunConfig& config, const std::string& key, const std::string& value);

// Hash of the canonical serialization (hex, first 16 chars used in headers).
std::string config_hash(const RunConfig& config);

}  // namespace rlfi::cfg
