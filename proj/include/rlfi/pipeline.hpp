#pragma once

#include <atomic>
#include <stdexcept>
#include <string>

#include "rlfi/config.hpp"

namespace rlfi::pipeline {

// Exit codes: 2 = missing upstream artifact, 3 = validation failure,
// 1 = any other error.
class StageError : public std::runtime_error {
public:
    StageError(int exit_code, const std::string& what)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

void run_ingest(const cfg::RunConfig& config);
void run_score(const cfg::RunConfig& config, const std::atomic<bool>* cancel = nullptr);
void run_index(const cfg::RunConfig& config);
void run_factor(const cfg::RunConfig& config);
void run_compare(const cfg::RunConfig& config);
void run_econ(const cfg::RunConfig& config);
void run_report(const cfg::RunConfig& config, bool force = false);

// Normalized corpus artifact (ingest output, consumed by later stages).
std::string tasks_artifact(const cfg::RunConfig& config);
std::vector<TaskRecord> read_normalized_tasks(const std::string& path);

}  // namespace rlfi::pipeline
