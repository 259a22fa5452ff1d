#include "rlfi/artifacts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "rlfi/version.hpp"

namespace rlfi::artifacts {

namespace {

std::string digest_hex(EVP_MD_CTX* ctx) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, digest, &len) != 1)
        throw std::runtime_error("sha256 finalization failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(static_cast<std::size_t>(len) * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

struct CtxGuard {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    ~CtxGuard() { EVP_MD_CTX_free(ctx); }
};

}  // namespace

std::string sha256_hex(const std::string& data) {
    CtxGuard g;
    if (!g.ctx || EVP_DigestInit_ex(g.ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(g.ctx, data.data(), data.size()) != 1)
        throw std::runtime_error("sha256 failed");
    return digest_hex(g.ctx);
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    CtxGuard g;
    if (!g.ctx || EVP_DigestInit_ex(g.ctx, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const auto got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(g.ctx, buf, static_cast<std::size_t>(got)) != 1)
            throw std::runtime_error("sha256 failed");
    }
    return digest_hex(g.ctx);
}

std::string Meta::csv_comment() const {
    std::ostringstream out;
    out << "rlfi v" << RLFI_VERSION << " stage=" << stage
        << " config=" << config_hash.substr(0, 16) << " seed=" << seed;
    return out.str();
}

nlohmann::json Meta::json() const {
    return nlohmann::json{{"tool", "rlfi"},
                          {"version", RLFI_VERSION},
                          {"stage", stage},
                          {"config_hash", config_hash.substr(0, 16)},
                          {"seed", seed}};
}

std::string Meta::jsonl_line() const {
    return nlohmann::json{{"_meta", json()}}.dump();
}

std::optional<Meta> read_meta(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string first;
    if (!std::getline(in, first)) return std::nullopt;

    Meta m;
    if (first.rfind("# rlfi", 0) == 0) {
        // "# rlfi vX stage=S config=H seed=N"
        std::istringstream ss(first);
        std::string tok;
        while (ss >> tok) {
            if (tok.rfind("stage=", 0) == 0) m.stage = tok.substr(6);
            else if (tok.rfind("config=", 0) == 0) m.config_hash = tok.substr(7);
            else if (tok.rfind("seed=", 0) == 0) m.seed = std::stoull(tok.substr(5));
        }
        return m;
    }
    // JSON document or JSONL first line
    std::ostringstream rest;
    rest << first << "\n" << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(rest.str(), nullptr, false);
    if (j.is_discarded()) {
        j = nlohmann::json::parse(first, nullptr, false);
        if (j.is_discarded()) return std::nullopt;
    }
    if (!j.is_object() || !j.contains("_meta")) return std::nullopt;
    const auto& meta = j["_meta"];
    m.stage = meta.value("stage", "");
    m.config_hash = meta.value("config_hash", "");
    m.seed = meta.value("seed", std::uint64_t{0});
    return m;
}

void write_json(const std::string& path, nlohmann::json body, const Meta& meta) {
    body["_meta"] = meta.json();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << body.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace rlfi::artifacts
