#include "vulrag/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>

#include "vulrag/prompts.hpp"
#include "vulrag/record_io.hpp"

namespace vulrag {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

ChatRequest make_request(std::vector<ChatMessage> messages, const std::string& model,
                         double temperature, int max_output_tokens) {
    ChatRequest req;
    req.messages = std::move(messages);
    req.model_name = model;
    req.temperature = temperature;
    req.max_output_tokens = max_output_tokens;
    return req;
}

/// Issues a request; one retry on truncation, then error.
ChatResponse complete_checked(Gateway& gateway, const ChatRequest& req) {
    ChatResponse resp = gateway.complete(req);
    if (resp.finish_reason == FinishReason::truncated) resp = gateway.complete(req);
    if (resp.finish_reason == FinishReason::truncated)
        throw KnowledgeError("response truncated twice for fingerprint " +
                             request_fingerprint(req));
    if (resp.finish_reason == FinishReason::error)
        throw KnowledgeError("backend error for fingerprint " + request_fingerprint(req));
    return resp;
}

json knowledge_keys_json(const VulnerabilityCauses& causes, const FixingSolution& fix) {
    return json{{"triggering_action", causes.triggering_action},
                {"abstract_description", causes.abstract_description},
                {"detailed_description", causes.detailed_description},
                {"solution", fix.solution_description}};
}

}  // namespace

std::optional<std::pair<VulnerabilityCauses, FixingSolution>> parse_knowledge_json(
    const std::string& text) {
    auto obj = extract_json_object(text);
    if (!obj) return std::nullopt;
    json body = *obj;
    if (body.contains("vulnerability_behavior")) body = body["vulnerability_behavior"];
    for (const char* key :
         {"triggering_action", "abstract_description", "detailed_description", "solution"}) {
        if (!body.contains(key) || !body[key].is_string() ||
            body[key].get<std::string>().empty())
            return std::nullopt;
    }
    VulnerabilityCauses causes;
    causes.triggering_action = body["triggering_action"].get<std::string>();
    causes.abstract_description = body["abstract_description"].get<std::string>();
    causes.detailed_description = body["detailed_description"].get<std::string>();
    FixingSolution fix;
    fix.solution_description = body["solution"].get<std::string>();
    return std::make_pair(causes, fix);
}

json FunctionalSemantics::to_json() const {
    return json{{"abstract_purpose", abstract_purpose}, {"detailed_behavior", detailed_behavior}};
}

FunctionalSemantics FunctionalSemantics::from_json(const json& j) {
    FunctionalSemantics s;
    s.abstract_purpose = j.at("abstract_purpose").get<std::string>();
    s.detailed_behavior = j.at("detailed_behavior").get<std::vector<std::string>>();
    return s;
}

json KnowledgeItem::to_json() const {
    return json{{"item_id", item_id},
                {"source", {{"cve_id", source_cve_id}, {"instance_id", source_instance_id}}},
                {"semantics", semantics.to_json()},
                {"causes",
                 {{"triggering_action", causes.triggering_action},
                  {"abstract_description", causes.abstract_description},
                  {"detailed_description", causes.detailed_description}}},
                {"fix", {{"solution", fix.solution_description}}},
                {"source_vulnerable_code", source_vulnerable_code},
                {"abstraction_applied", abstraction_applied}};
}

KnowledgeItem KnowledgeItem::from_json(const json& j) {
    KnowledgeItem item;
    item.item_id = j.at("item_id").get<std::string>();
    item.source_cve_id = j.at("source").at("cve_id").get<std::string>();
    item.source_instance_id = j.at("source").at("instance_id").get<std::string>();
    item.semantics = FunctionalSemantics::from_json(j.at("semantics"));
    item.causes.triggering_action = j.at("causes").at("triggering_action").get<std::string>();
    item.causes.abstract_description =
        j.at("causes").at("abstract_description").get<std::string>();
    item.causes.detailed_description =
        j.at("causes").at("detailed_description").get<std::string>();
    item.fix.solution_description = j.at("fix").at("solution").get<std::string>();
    item.source_vulnerable_code = j.at("source_vulnerable_code").get<std::string>();
    item.abstraction_applied = j.at("abstraction_applied").get<bool>();
    return item;
}

void KnowledgeBase::save(const std::filesystem::path& path, const json& config) const {
    std::vector<json> records;
    records.push_back(json{{"schema_version", schema_version}});
    for (const auto& item : items) records.push_back(item.to_json());
    write_jsonl(path, make_header(config), records);
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path) {
    KnowledgeBase kb;
    auto file = read_jsonl(path);
    std::set<std::string> ids;
    for (const auto& rec : file.records) {
        if (rec.contains("schema_version")) {
            kb.schema_version = rec["schema_version"].get<int>();
            continue;
        }
        KnowledgeItem item = KnowledgeItem::from_json(rec);
        if (!ids.insert(item.item_id).second)
            throw KnowledgeError("duplicate item_id: " + item.item_id);
        kb.items.push_back(std::move(item));
    }
    return kb;
}

Demonstrations Demonstrations::load(const std::filesystem::path& path) {
    auto file = read_jsonl(path);
    if (file.records.size() < 2)
        throw KnowledgeError("demonstrations file needs two records: " + path.string());
    Demonstrations d;
    d.example1 = file.records[0].at("example").get<std::string>();
    d.example2 = file.records[1].at("example").get<std::string>();
    return d;
}

std::string render_causes(const VulnerabilityCauses& causes) {
    return "Vulnerability causes:\nTriggering action: " + causes.triggering_action +
           "\nAbstract description: " + causes.abstract_description +
           "\nDetailed description: " + causes.detailed_description;
}

std::string render_fix(const FixingSolution& fix) {
    return "Fixing solution: " + fix.solution_description;
}

std::string parse_purpose_response(const std::string& text) {
    static const std::regex label_re(R"(function purpose\s*:)", std::regex::icase);
    std::smatch m;
    if (!std::regex_search(text, m, label_re))
        throw KnowledgeError("no \"Function purpose:\" label in response: " + text);
    std::string purpose = trim(m.suffix().str());
    if (purpose.empty()) throw KnowledgeError("empty purpose in response: " + text);
    return purpose;
}

std::vector<std::string> parse_behavior_response(const std::string& text) {
    std::string body = text;
    static const std::regex label_re(R"(the functions of the code snippet are\s*:)",
                                     std::regex::icase);
    std::smatch m;
    if (std::regex_search(body, m, label_re)) body = m.suffix().str();

    // numbered items: "1. ..." up to the next number or end of text
    static const std::regex item_re(R"((?:^|\s)(\d+)\.\s*)");
    std::vector<std::string> items;
    auto begin = std::sregex_iterator(body.begin(), body.end(), item_re);
    auto end = std::sregex_iterator();
    std::vector<std::pair<size_t, size_t>> spans;  // (content start, match start)
    for (auto it = begin; it != end; ++it) {
        spans.emplace_back(static_cast<size_t>(it->position(0) + it->length(0)),
                           static_cast<size_t>(it->position(0)));
    }
    for (size_t i = 0; i < spans.size(); ++i) {
        size_t from = spans[i].first;
        size_t to = (i + 1 < spans.size()) ? spans[i + 1].second : body.size();
        std::string entry = trim(body.substr(from, to - from));
        if (!entry.empty()) items.push_back(std::move(entry));
    }
    if (items.empty()) throw KnowledgeError("no numbered behavior entries in response: " + text);
    return items;
}

std::optional<json> extract_json_object(const std::string& text) {
    size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') in_string = true;
            if (c == '{') ++depth;
            if (c == '}') {
                --depth;
                if (depth == 0) {
                    auto candidate = text.substr(start, i - start + 1);
                    json parsed = json::parse(candidate, nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                    break;
                }
            }
        }
        start = text.find('{', start + 1);
    }
    return std::nullopt;
}

FunctionalSemantics extract_semantics(const std::string& code, Gateway& gateway,
                                      const std::string& model, double temperature,
                                      int max_output_tokens) {
    if (code.empty()) throw KnowledgeError("empty code");
    FunctionalSemantics semantics;

    auto purpose_req = make_request({{Role::user, prompts::purpose_extraction(code)}}, model,
                                    temperature, max_output_tokens);
    semantics.abstract_purpose = parse_purpose_response(complete_checked(gateway, purpose_req).text);

    auto behavior_req = make_request({{Role::user, prompts::behavior_extraction(code)}}, model,
                                     temperature, max_output_tokens);
    semantics.detailed_behavior =
        parse_behavior_response(complete_checked(gateway, behavior_req).text);
    return semantics;
}

std::pair<VulnerabilityCauses, FixingSolution> extract_causes_and_fix(
    const VulnInstance& instance, Gateway& gateway, const Demonstrations& demos,
    const std::string& model, double temperature, int max_output_tokens) {
    std::string round1_prompt =
        prompts::extraction_round1(instance.cve_id, instance.vulnerable_code,
                                   instance.cve_description, instance.patch_diff,
                                   instance.patched_code);
    auto round1_req =
        make_request({{Role::user, round1_prompt}}, model, temperature, max_output_tokens);
    ChatResponse round1 = complete_checked(gateway, round1_req);

    std::vector<ChatMessage> conversation{{Role::user, round1_prompt},
                                          {Role::assistant, round1.text},
                                          {Role::user, prompts::extraction_round2(
                                                           demos.example1, demos.example2)}};
    auto round2_req = make_request(conversation, model, temperature, max_output_tokens);
    ChatResponse round2 = complete_checked(gateway, round2_req);

    auto parsed = parse_knowledge_json(round2.text);
    if (!parsed) {
        // one reformat retry with an explicit format reminder
        conversation.push_back({Role::assistant, round2.text});
        conversation.push_back({Role::user, prompts::reformat_reminder()});
        auto retry_req = make_request(conversation, model, temperature, max_output_tokens);
        ChatResponse retry = complete_checked(gateway, retry_req);
        parsed = parse_knowledge_json(retry.text);
        if (!parsed)
            throw KnowledgeError("unparseable round-2 output for " + instance.instance_id +
                                 ": " + retry.text);
    }
    return *parsed;
}

KnowledgeItem abstract_item(const KnowledgeItem& item, Gateway& gateway,
                            const std::string& model, double temperature,
                            int max_output_tokens) {
    if (item.abstraction_applied)
        throw KnowledgeError("item already abstracted: " + item.item_id);

    std::string knowledge_json = knowledge_keys_json(item.causes, item.fix).dump(2);
    std::string prompt = prompts::knowledge_abstraction(knowledge_json);
    auto req = make_request({{Role::user, prompt}}, model, temperature, max_output_tokens);
    ChatResponse resp = complete_checked(gateway, req);

    auto parsed = parse_knowledge_json(resp.text);
    if (!parsed) {
        auto retry_req = make_request({{Role::user, prompt},
                                       {Role::assistant, resp.text},
                                       {Role::user, prompts::reformat_reminder()}},
                                      model, temperature, max_output_tokens);
        ChatResponse retry = complete_checked(gateway, retry_req);
        parsed = parse_knowledge_json(retry.text);
        if (!parsed)
            throw KnowledgeError("unparseable abstraction output for " + item.item_id + ": " +
                                 retry.text);
    }

    KnowledgeItem out = item;  // semantics and source code unchanged
    out.causes = parsed->first;
    out.fix = parsed->second;
    out.abstraction_applied = true;
    return out;
}

KbBuildResult build_knowledge_base(const std::vector<VulnInstance>& train, Gateway& gateway,
                                   const Demonstrations& demos, const KbBuildOptions& options) {
    if (train.empty()) throw KnowledgeError("empty training set");
    for (const auto& inst : train) {
        if (options.test_cve_ids.count(inst.cve_id))
            throw KnowledgeError("training set contains test-split CVE " + inst.cve_id +
                                 "; refusing to build");
    }

    KbBuildResult result;
    std::map<std::string, KnowledgeItem> existing;  // by source instance_id
    bool file_started = false;
    if (!options.out_path.empty() && std::filesystem::exists(options.out_path)) {
        KnowledgeBase prior = KnowledgeBase::load(options.out_path);
        for (auto& item : prior.items) existing[item.source_instance_id] = item;
        file_started = true;
    }

    auto persist = [&](const KnowledgeItem& item) {
        if (options.out_path.empty()) return;
        if (!file_started) {
            write_jsonl(options.out_path, make_header(options.config_header),
                        {json{{"schema_version", result.kb.schema_version}}});
            file_started = true;
        }
        append_jsonl(options.out_path, item.to_json());
    };

    size_t failures = 0;
    for (const auto& inst : train) {
        if (auto it = existing.find(inst.instance_id); it != existing.end()) {
            result.kb.items.push_back(it->second);
            result.skipped_resume++;
            continue;
        }
        try {
            KnowledgeItem item;
            item.item_id = "ki-" + inst.instance_id;
            item.source_cve_id = inst.cve_id;
            item.source_instance_id = inst.instance_id;
            item.source_vulnerable_code = inst.vulnerable_code;
            item.semantics = extract_semantics(inst.vulnerable_code, gateway, options.model,
                                               options.temperature, options.max_output_tokens);
            std::tie(item.causes, item.fix) =
                extract_causes_and_fix(inst, gateway, demos, options.model, options.temperature,
                                       options.max_output_tokens);
            if (options.apply_abstraction)
                item = abstract_item(item, gateway, options.model, options.temperature,
                                     options.max_output_tokens);
            persist(item);
            result.kb.items.push_back(std::move(item));
        } catch (const std::exception& e) {
            ++failures;
            result.failures.push_back(inst.instance_id + ": " + e.what());
            if (static_cast<double>(failures) >
                options.failure_budget * static_cast<double>(train.size())) {
                std::string summary;
                for (const auto& f : result.failures) summary += "\n  " + f;
                throw KnowledgeError("aborting: " + std::to_string(failures) + "/" +
                                     std::to_string(train.size()) +
                                     " extractions failed:" + summary);
            }
        }
    }
    return result;
}

}  // namespace vulrag
