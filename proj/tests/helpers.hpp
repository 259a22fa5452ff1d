#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "rlfi/rubric.hpp"
#include "rlfi/stats.hpp"
#include "rlfi/types.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("rlfi_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Synthetic corpus: n tasks spread over ceil(n/5) occupations, digital-only
// task text (no physical keywords) unless mixed is set.
inline std::vector<rlfi::TaskRecord> make_tasks(int n, bool mixed = false,
                                                std::uint64_t seed = 7) {
    rlfi::stats::Rng rng(seed);
    std::vector<rlfi::TaskRecord> tasks;
    tasks.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rlfi::TaskRecord t;
        const int occ = i / 5;
        char soc[16];
        std::snprintf(soc, sizeof(soc), "%02d-%04d.00", 10 + occ % 40, 1000 + occ);
        t.soc_code = soc;
        t.occupation_title = "Occupation " + std::to_string(occ);
        t.task_id = 100000 + i;
        if (mixed && rng.next_int(0, 2) == 0)
            t.task_text = "Install and repair equipment for record " + std::to_string(t.task_id);
        else
            t.task_text = "Review and reconcile ledger entries for record " +
                          std::to_string(t.task_id);
        t.importance = 1.0 + static_cast<double>(rng.next_int(0, 8)) * 0.5;
        tasks.push_back(std::move(t));
    }
    return tasks;
}

inline rlfi::rubric::PromptTemplate tiny_template() {
    return rlfi::rubric::PromptTemplate{
        "Rate {{OCCUPATION}} doing: {{TASK}}\nRespond in JSON.", "4.2"};
}

// Valid gate-passing response body in the model's output schema.
inline std::string valid_response(const rlfi::TaskRecord& task,
                                  const std::array<int, 8>& scores,
                                  const std::string& binding = "D1") {
    nlohmann::json dims = nlohmann::json::object();
    for (int d = 0; d < 8; ++d)
        dims[rlfi::dimension_label(d)] = {
            {"justification", "Reasoned justification for " + rlfi::dimension_label(d) + "."},
            {"score", scores[static_cast<std::size_t>(d)]}};
    nlohmann::json j{
        {"occupation", task.occupation_title},
        {"task", task.task_text},
        {"physical_feasibility",
         {{"justification", "Fully digital workflow."}, {"pass", true}}},
        {"task_reasoning",
         {{"task_type", "analytical"},
          {"core_output", "A verified dataset."},
          {"verification_bottleneck", "Source comparison."},
          {"tool_requirements", "Text interfaces."},
          {"binding_constraint", binding}}},
        {"dimensions", dims}};
    return j.dump();
}

}  // namespace testutil
