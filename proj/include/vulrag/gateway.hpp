#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace vulrag {

using json = nlohmann::json;

enum class Role { system, user, assistant };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

struct ChatMessage {
    Role role = Role::user;
    std::string text;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 4096;

    json to_json() const;
    static ChatRequest from_json(const json& j);
};

enum class FinishReason { complete, truncated, error };

struct ChatResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::complete;
    long prompt_tokens = 0;
    long output_tokens = 0;

    json to_json() const;
    static ChatResponse from_json(const json& j);
};

/// Versioned canonical fingerprint over model, temperature, token limit and
/// the exact message texts. Changing any field changes the fingerprint.
std::string request_fingerprint(const ChatRequest& request);

class GatewayError : public std::runtime_error {
public:
    explicit GatewayError(const std::string& what) : std::runtime_error(what) {}
};

/// Map from request fingerprint to recorded response, persisted as jsonl.
class ReplayCache {
public:
    ReplayCache() = default;

    static ReplayCache load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::optional<ChatResponse> lookup(const std::string& fingerprint) const;

    /// Conflicting existing entry raises unless overwrite is set.
    void record(const ChatRequest& request, const ChatResponse& response,
                bool overwrite = false);

    size_t size() const { return entries_.size(); }

private:
    struct Entry {
        ChatRequest request;
        ChatResponse response;
    };
    std::map<std::string, Entry> entries_;
};

/// Transport behind the gateway; retries are the gateway's concern.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual bool is_replay() const { return false; }
};

/// Chat-completion HTTP backend (model/messages/temperature request,
/// choices[0].message.content response).
class HttpBackend : public Backend {
public:
    HttpBackend(std::string base_url, std::string api_key);
    ChatResponse complete(const ChatRequest& request) override;

private:
    std::string base_url_;
    std::string api_key_;
};

/// Replay-only backend: a miss is an explicit error, never a fabrication.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(std::shared_ptr<ReplayCache> cache) : cache_(std::move(cache)) {}
    ChatResponse complete(const ChatRequest& request) override;
    bool is_replay() const override { return true; }

private:
    std::shared_ptr<ReplayCache> cache_;
};

/// Raised by HttpBackend for retryable failures (connection errors, 429, 5xx).
class TransientError : public GatewayError {
public:
    explicit TransientError(const std::string& what) : GatewayError(what) {}
};

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_initial_ms = 250;
    double backoff_factor = 2.0;
};

/// Uniform entry point: retry on transient failure, optional cache-through
/// recording so every live run becomes replayable.
class Gateway {
public:
    Gateway(std::unique_ptr<Backend> backend, RetryPolicy retry = {},
            std::shared_ptr<ReplayCache> record_cache = nullptr,
            std::filesystem::path cache_path = {});

    ChatResponse complete(const ChatRequest& request);

    bool is_replay() const { return backend_->is_replay(); }

private:
    std::unique_ptr<Backend> backend_;
    RetryPolicy retry_;
    std::shared_ptr<ReplayCache> record_cache_;
    std::filesystem::path cache_path_;
    std::mutex cache_mutex_;
};

}  // namespace vulrag
