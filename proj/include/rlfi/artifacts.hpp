#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rlfi::artifacts {

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

// Provenance stamp carried by every artifact: CSV/JSONL get a comment or
// "_meta" first line, JSON documents get a "_meta" object.
struct Meta {
    std::string stage;
    std::string config_hash;  // full hex
    std::uint64_t seed = 0;

    std::string csv_comment() const;   // "rlfi v… stage=… config=… seed=…"
    nlohmann::json json() const;
    std::string jsonl_line() const;    // {"_meta": {...}}
};

// Reads the stamp back from any artifact written by this toolkit.
std::optional<Meta> read_meta(const std::string& path);

void write_json(const std::string& path, nlohmann::json body, const Meta& meta);

}  // namespace rlfi::artifacts
