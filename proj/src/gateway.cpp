#include "vulrag/gateway.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"
#include "vulrag/hash.hpp"
#include "vulrag/record_io.hpp"

namespace vulrag {

std::string to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(const std::string& s) {
    if (s == "system") return Role::system;
    if (s == "assistant") return Role::assistant;
    if (s == "user") return Role::user;
    throw GatewayError("unknown role: " + s);
}

json ChatRequest::to_json() const {
    json msgs = json::array();
    for (const auto& m : messages)
        msgs.push_back({{"role", to_string(m.role)}, {"content", m.text}});
    return json{{"model", model_name},
                {"messages", msgs},
                {"temperature", temperature},
                {"max_tokens", max_output_tokens}};
}

ChatRequest ChatRequest::from_json(const json& j) {
    ChatRequest req;
    req.model_name = j.at("model").get<std::string>();
    req.temperature = j.at("temperature").get<double>();
    req.max_output_tokens = j.value("max_tokens", 4096);
    for (const auto& m : j.at("messages")) {
        req.messages.push_back(
            {role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    }
    return req;
}

namespace {
std::string finish_to_string(FinishReason r) {
    switch (r) {
        case FinishReason::complete: return "complete";
        case FinishReason::truncated: return "truncated";
        case FinishReason::error: return "error";
    }
    return "error";
}

FinishReason finish_from_string(const std::string& s) {
    if (s == "complete") return FinishReason::complete;
    if (s == "truncated") return FinishReason::truncated;
    return FinishReason::error;
}
}  // namespace

json ChatResponse::to_json() const {
    return json{{"text", text},
                {"finish_reason", finish_to_string(finish_reason)},
                {"usage", {{"prompt_tokens", prompt_tokens}, {"output_tokens", output_tokens}}}};
}

ChatResponse ChatResponse::from_json(const json& j) {
    ChatResponse resp;
    resp.text = j.at("text").get<std::string>();
    resp.finish_reason = finish_from_string(j.at("finish_reason").get<std::string>());
    if (j.contains("usage")) {
        resp.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        resp.output_tokens = j["usage"].value("output_tokens", 0L);
    }
    return resp;
}

std::string request_fingerprint(const ChatRequest& request) {
    // Canonicalization v1: explicit role tags and length-prefixed UTF-8
    // texts so no message content can collide with the framing.
    std::string canon = "fp-v1\n";
    canon += "model=" + request.model_name + "\n";
    char temp_buf[64];
    std::snprintf(temp_buf, sizeof(temp_buf), "temperature=%.17g\n", request.temperature);
    canon += temp_buf;
    canon += "max_tokens=" + std::to_string(request.max_output_tokens) + "\n";
    for (const auto& m : request.messages) {
        canon += to_string(m.role) + ":" + std::to_string(m.text.size()) + ":" + m.text + "\n";
    }
    return sha256_hex(canon);
}

ReplayCache ReplayCache::load(const std::filesystem::path& path) {
    ReplayCache cache;
    if (!std::filesystem::exists(path)) return cache;
    auto file = read_jsonl(path);
    for (const auto& rec : file.records) {
        Entry e;
        e.request = ChatRequest::from_json(rec.at("request"));
        e.response = ChatResponse::from_json(rec.at("response"));
        cache.entries_[rec.at("fingerprint").get<std::string>()] = std::move(e);
    }
    return cache;
}

void ReplayCache::save(const std::filesystem::path& path) const {
    std::vector<json> records;
    records.reserve(entries_.size());
    for (const auto& [fp, e] : entries_) {
        records.push_back(json{{"fingerprint", fp},
                               {"request", e.request.to_json()},
                               {"response", e.response.to_json()}});
    }
    write_jsonl(path, std::nullopt, records);
}

std::optional<ChatResponse> ReplayCache::lookup(const std::string& fingerprint) const {
    auto it = entries_.find(fingerprint);
    if (it == entries_.end()) return std::nullopt;
    return it->second.response;
}

void ReplayCache::record(const ChatRequest& request, const ChatResponse& response,
                         bool overwrite) {
    std::string fp = request_fingerprint(request);
    auto it = entries_.find(fp);
    if (it != entries_.end() && !overwrite) {
        if (it->second.response.to_json() != response.to_json())
            throw GatewayError("conflicting cache entry for fingerprint " + fp);
        return;
    }
    entries_[fp] = {request, response};
}

HttpBackend::HttpBackend(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
    // split base_url into origin and path prefix
    std::string origin = base_url_;
    std::string prefix;
    auto scheme_end = origin.find("://");
    auto path_start = origin.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start != std::string::npos) {
        prefix = origin.substr(path_start);
        origin = origin.substr(0, path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }

    httplib::Client client(origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto result = client.Post(prefix + "/chat/completions", headers,
                              request.to_json().dump(), "application/json");
    if (!result) throw TransientError("connection failure: " + httplib::to_string(result.error()));
    if (result->status == 429 || result->status >= 500)
        throw TransientError("http status " + std::to_string(result->status));
    if (result->status != 200)
        throw GatewayError("http status " + std::to_string(result->status) + ": " + result->body);

    json body = json::parse(result->body);
    ChatResponse resp;
    const auto& choice = body.at("choices").at(0);
    resp.text = choice.at("message").at("content").get<std::string>();
    std::string finish = choice.value("finish_reason", "stop");
    resp.finish_reason =
        (finish == "length") ? FinishReason::truncated : FinishReason::complete;
    if (body.contains("usage")) {
        resp.prompt_tokens = body["usage"].value("prompt_tokens", 0L);
        resp.output_tokens = body["usage"].value("completion_tokens", 0L);
    }
    return resp;
}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
    std::string fp = request_fingerprint(request);
    if (auto hit = cache_->lookup(fp)) return *hit;
    throw GatewayError("unrecorded prompt: fingerprint " + fp);
}

Gateway::Gateway(std::unique_ptr<Backend> backend, RetryPolicy retry,
                 std::shared_ptr<ReplayCache> record_cache, std::filesystem::path cache_path)
    : backend_(std::move(backend)),
      retry_(retry),
      record_cache_(std::move(record_cache)),
      cache_path_(std::move(cache_path)) {}

ChatResponse Gateway::complete(const ChatRequest& request) {
    if (request.messages.empty()) throw GatewayError("empty message list");

    int attempt = 0;
    double backoff = retry_.backoff_initial_ms;
    ChatResponse resp;
    while (true) {
        ++attempt;
        try {
            resp = backend_->complete(request);
            break;
        } catch (const TransientError&) {
            if (attempt >= retry_.max_attempts) throw;
            if (backoff > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(static_cast<long>(backoff)));
            backoff *= retry_.backoff_factor;
        }
    }

    if (record_cache_ && !backend_->is_replay()) {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        record_cache_->record(request, resp, /*overwrite=*/true);
        if (!cache_path_.empty()) record_cache_->save(cache_path_);
    }
    return resp;
}

}  // namespace vulrag
