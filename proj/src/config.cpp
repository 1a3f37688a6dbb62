#include "vulrag/config.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <vector>

#include "vulrag/record_io.hpp"

extern char** environ;

namespace vulrag {

namespace {

const std::vector<std::string>& valid_keys() {
    static const std::vector<std::string> keys{
        "model",       "base_url",   "api_key_env", "temperature", "max_output_tokens",
        "retries",     "backoff_ms", "cache_path",  "in_flight",   "n",
        "final_k",     "k",          "b",           "bm25_doc_side", "token_limit",
        "chars_per_token", "ratio",  "seed",        "stratified",  "strategy",
        "combined_prompt", "jobs",   "timestamp"};
    return keys;
}

size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t cost = (a[i - 1] == b[j - 1]) ? 0 : 1;
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string nearest_key(const std::string& key) {
    std::string best;
    size_t best_dist = SIZE_MAX;
    for (const auto& k : valid_keys()) {
        size_t d = edit_distance(key, k);
        if (d < best_dist) {
            best_dist = d;
            best = k;
        }
    }
    return best;
}

double as_double(const json& v) {
    return v.is_string() ? std::stod(v.get<std::string>()) : v.get<double>();
}

long as_long(const json& v) {
    return v.is_string() ? std::stol(v.get<std::string>()) : v.get<long>();
}

bool as_bool(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    std::string s = v.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("not a boolean: " + s);
}

std::string as_string(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

json RunConfig::to_json() const {
    return json{{"model", model},
                {"base_url", base_url},
                {"api_key_env", api_key_env},
                {"temperature", temperature},
                {"max_output_tokens", max_output_tokens},
                {"retries", retries},
                {"backoff_ms", backoff_ms},
                {"cache_path", cache_path},
                {"in_flight", in_flight},
                {"n", n},
                {"final_k", final_k},
                {"k", k},
                {"b", b},
                {"bm25_doc_side", bm25_doc_side},
                {"token_limit", token_limit},
                {"chars_per_token", chars_per_token},
                {"ratio", ratio},
                {"seed", seed},
                {"stratified", stratified},
                {"strategy", strategy},
                {"combined_prompt", combined_prompt},
                {"jobs", jobs}};
}

std::string RunConfig::resolve_timestamp() const {
    if (!timestamp.empty()) return timestamp;
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void apply_config(RunConfig& config, const json& values, const std::string& source) {
    if (!values.is_object()) throw ConfigError(source + ": config must be an object");
    for (const auto& [key, value] : values.items()) {
        if (value.is_null()) continue;
        try {
            if (key == "model") config.model = as_string(value);
            else if (key == "base_url") config.base_url = as_string(value);
            else if (key == "api_key_env") config.api_key_env = as_string(value);
            else if (key == "temperature") config.temperature = as_double(value);
            else if (key == "max_output_tokens") config.max_output_tokens = static_cast<int>(as_long(value));
            else if (key == "retries") config.retries = static_cast<int>(as_long(value));
            else if (key == "backoff_ms") config.backoff_ms = static_cast<int>(as_long(value));
            else if (key == "cache_path") config.cache_path = as_string(value);
            else if (key == "in_flight") config.in_flight = static_cast<int>(as_long(value));
            else if (key == "n") config.n = static_cast<int>(as_long(value));
            else if (key == "final_k") config.final_k = static_cast<int>(as_long(value));
            else if (key == "k") config.k = as_double(value);
            else if (key == "b") config.b = as_double(value);
            else if (key == "bm25_doc_side") config.bm25_doc_side = as_bool(value);
            else if (key == "token_limit") config.token_limit = as_long(value);
            else if (key == "chars_per_token") config.chars_per_token = static_cast<int>(as_long(value));
            else if (key == "ratio") config.ratio = as_double(value);
            else if (key == "seed") config.seed = as_long(value);
            else if (key == "stratified") config.stratified = as_bool(value);
            else if (key == "strategy") config.strategy = as_string(value);
            else if (key == "combined_prompt") config.combined_prompt = as_bool(value);
            else if (key == "jobs") config.jobs = static_cast<int>(as_long(value));
            else if (key == "timestamp") config.timestamp = as_string(value);
            else
                throw ConfigError(source + ": unknown key \"" + key + "\" (nearest valid key: \"" +
                                  nearest_key(key) + "\")");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(source + ": bad value for \"" + key + "\": " + e.what());
        }
    }
}

RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::map<std::string, std::string>& env, const json& flags) {
    RunConfig config;
    if (file) {
        json parsed = json::parse(read_text_file(*file));
        apply_config(config, parsed, file->string());
    }
    json env_values = json::object();
    for (const auto& [key, value] : env) env_values[key] = value;
    apply_config(config, env_values, "environment");
    apply_config(config, flags, "flags");
    return config;
}

std::map<std::string, std::string> config_from_process_env() {
    std::map<std::string, std::string> out;
    const std::string prefix = "VULRAG_";
    for (char** e = environ; *e != nullptr; ++e) {
        std::string entry(*e);
        auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string name = entry.substr(0, eq);
        if (name.rfind(prefix, 0) != 0) continue;
        std::string key = name.substr(prefix.size());
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (key == "api_key") continue;  // secret, consumed directly by the gateway
        if (std::find(valid_keys().begin(), valid_keys().end(), key) == valid_keys().end())
            continue;
        out[key] = entry.substr(eq + 1);
    }
    return out;
}

}  // namespace vulrag
