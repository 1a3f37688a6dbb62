#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

namespace vulrag {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Layered run configuration: flags > env (VULRAG_*) > file > defaults.
/// Defaults: n=10, k=1.2, b=0.75, token limit 16384, temperature 0.
struct RunConfig {
    // gateway
    std::string model = "gpt-3.5-turbo-0125";
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "VULRAG_API_KEY";
    double temperature = 0.0;
    int max_output_tokens = 4096;
    int retries = 3;
    int backoff_ms = 250;
    std::string cache_path;
    int in_flight = 4;

    // retrieval
    int n = 10;
    int final_k = 10;
    double k = 1.2;
    double b = 0.75;
    bool bm25_doc_side = false;

    // corpus
    long token_limit = 16384;
    int chars_per_token = 4;
    double ratio = 0.2;
    long seed = 0;
    bool stratified = true;

    // detection
    std::string strategy = "vul-rag";
    bool combined_prompt = false;
    int jobs = 1;

    // reporting; empty means "now" (override for reproducible artifacts)
    std::string timestamp;

    /// Resolved config as embedded in artifact headers (no secrets).
    json to_json() const;

    std::string resolve_timestamp() const;
};

/// Applies a flat key/value object; unknown keys raise an error naming the
/// nearest valid key. Values may be JSON-typed or strings to coerce.
void apply_config(RunConfig& config, const json& values, const std::string& source);

/// Precedence: flags > env > file > defaults.
RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::map<std::string, std::string>& env, const json& flags);

/// Reads VULRAG_* variables from the process environment.
std::map<std::string, std::string> config_from_process_env();

}  // namespace vulrag
