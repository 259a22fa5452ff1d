#pragma once

// In-process chat-completions mock for annotator protocol tests. Tasks are
// identified by a "record <task_id>" marker inside the rendered prompt.

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
// glibc's resolv.h (pulled in by httplib) defines _res, which collides with
// Eigen parameter names in translation units that use both.
#ifdef _res
#undef _res
#endif
#include <nlohmann/json.hpp>

#include "rlfi/annotator.hpp"
#include "rlfi/rubric.hpp"

namespace testutil {

class MockGateway {
public:
    struct Rule {
        int fail_first = 0;        // fail this many attempts per task
        int fail_status = 500;
        double retry_after_s = -1.0;  // sent on 429 when >= 0
        int sleep_ms = 0;             // handler delay
        bool sleep_only_first = false;
    };

    Rule rule;
    std::atomic<int> total_requests{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};

    MockGateway() {
        // enough handler threads that the client's in-flight window, not the
        // server, is the binding constraint
        server_.new_task_queue = [] { return new httplib::ThreadPool(64); };
        server_.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle(req, res);
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockGateway() {
        server_.stop();
        thread_.join();
    }

    std::string base_url() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    }

    int attempts_for(std::int64_t task_id) {
        std::lock_guard lock(mu_);
        return static_cast<int>(times_[task_id].size());
    }

    // Monotonic seconds of each attempt for a task.
    std::vector<double> attempt_times(std::int64_t task_id) {
        std::lock_guard lock(mu_);
        return times_[task_id];
    }

private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        ++total_requests;
        const int now_in_flight = ++in_flight;
        int prev = max_in_flight.load();
        while (now_in_flight > prev &&
               !max_in_flight.compare_exchange_weak(prev, now_in_flight)) {
        }

        const auto body = nlohmann::json::parse(req.body);
        const std::string prompt = body["messages"][0]["content"].get<std::string>();
        std::smatch m;
        std::int64_t task_id = -1;
        if (std::regex_search(prompt, m, std::regex("record (\\d+)")))
            task_id = std::stoll(m[1]);

        int attempt_no = 0;
        {
            std::lock_guard lock(mu_);
            auto& t = times_[task_id];
            t.push_back(std::chrono::duration<double>(
                            std::chrono::steady_clock::now().time_since_epoch())
                            .count());
            attempt_no = static_cast<int>(t.size());
        }

        const bool should_sleep =
            rule.sleep_ms > 0 && (!rule.sleep_only_first || attempt_no == 1);
        if (should_sleep)
            std::this_thread::sleep_for(std::chrono::milliseconds(rule.sleep_ms));

        if (attempt_no <= rule.fail_first) {
            res.status = rule.fail_status;
            if (rule.fail_status == 429 && rule.retry_after_s >= 0.0)
                res.set_header("Retry-After",
                               std::to_string(static_cast<int>(rule.retry_after_s)));
            res.set_content("{\"error\":\"induced failure\"}", "application/json");
            --in_flight;
            return;
        }

        // Respond with a deterministic, schema-valid annotation.
        rlfi::TaskRecord task;
        task.soc_code = "99-0001.00";
        task.occupation_title = "Mock Occupation";
        task.task_id = task_id;
        task.task_text = "record " + std::to_string(task_id);
        const auto annotation = rlfi::annot::stub_annotate(task, 1);
        const std::string content = rlfi::rubric::to_model_json(annotation, task).dump();
        nlohmann::json envelope{
            {"choices",
             nlohmann::json::array(
                 {nlohmann::json{{"message", {{"role", "assistant"}, {"content", content}}}}})},
            {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 20}}}};
        res.set_content(envelope.dump(), "application/json");
        --in_flight;
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mu_;
    std::map<std::int64_t, std::vector<double>> times_;
};

}  // namespace testutil
