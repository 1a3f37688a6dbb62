#include "vulrag/detection.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include "vulrag/prompts.hpp"
#include "vulrag/record_io.hpp"

namespace vulrag {

std::string to_string(Ternary t) {
    switch (t) {
        case Ternary::yes: return "yes";
        case Ternary::no: return "no";
        case Ternary::unparsed: return "unparsed";
    }
    return "unparsed";
}

Ternary ternary_from_string(const std::string& s) {
    if (s == "yes") return Ternary::yes;
    if (s == "no") return Ternary::no;
    return Ternary::unparsed;
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::vul_rag: return "vul_rag";
        case Strategy::basic: return "basic";
        case Strategy::cot1: return "cot1";
        case Strategy::cot2: return "cot2";
        case Strategy::cwe_enhanced: return "cwe_enhanced";
        case Strategy::code_rag: return "code_rag";
    }
    return "vul_rag";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "vul_rag" || s == "vul-rag") return Strategy::vul_rag;
    if (s == "basic") return Strategy::basic;
    if (s == "cot1") return Strategy::cot1;
    if (s == "cot2") return Strategy::cot2;
    if (s == "cwe_enhanced" || s == "cwe") return Strategy::cwe_enhanced;
    if (s == "code_rag" || s == "code-rag") return Strategy::code_rag;
    throw std::runtime_error("unknown strategy: " + s);
}

Ternary parse_yes_no(const std::string& text) {
    // word positions of standalone yes/no, case-insensitive
    static const std::regex word_re(R"([A-Za-z]+)");
    struct Hit {
        size_t pos;
        bool yes;
    };
    std::vector<Hit> hits;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), word_re);
         it != std::sregex_iterator(); ++it) {
        std::string w = it->str();
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (w == "yes") hits.push_back({static_cast<size_t>(it->position()), true});
        if (w == "no") hits.push_back({static_cast<size_t>(it->position()), false});
    }
    if (hits.empty()) return Ternary::unparsed;

    const Hit& last = hits.back();
    // conflicting positions: an opposite answer inside the same sentence
    size_t sentence_start = 0;
    for (size_t i = last.pos; i > 0; --i) {
        char c = text[i - 1];
        if (c == '.' || c == '!' || c == '?' || c == '\n') {
            sentence_start = i;
            break;
        }
    }
    for (const Hit& h : hits) {
        if (h.pos >= sentence_start && h.pos < last.pos && h.yes != last.yes)
            return Ternary::unparsed;
    }
    return last.yes ? Ternary::yes : Ternary::no;
}

json ItemJudgment::to_json() const {
    json transcripts_json = json::array();
    for (const auto& t : transcripts)
        transcripts_json.push_back({{"prompt", t.prompt}, {"response", t.response}});
    return json{{"item_id", item_id},
                {"cause_present", vulrag::to_string(cause_present)},
                {"fix_applied", vulrag::to_string(fix_applied)},
                {"transcripts", std::move(transcripts_json)}};
}

ItemJudgment ItemJudgment::from_json(const json& j) {
    ItemJudgment judgment;
    judgment.item_id = j.at("item_id").get<std::string>();
    judgment.cause_present = ternary_from_string(j.at("cause_present").get<std::string>());
    judgment.fix_applied = ternary_from_string(j.at("fix_applied").get<std::string>());
    for (const auto& t : j.at("transcripts")) {
        judgment.transcripts.push_back(
            {t.at("prompt").get<std::string>(), t.at("response").get<std::string>()});
    }
    return judgment;
}

json DetectionVerdict::to_json() const {
    json judgments_json = json::array();
    for (const auto& judgment : judgments) judgments_json.push_back(judgment.to_json());
    json j{{"code_ref", code_ref},
           {"label", label == Label::vulnerable ? "vulnerable" : "non_vulnerable"},
           {"strategy", vulrag::to_string(strategy)},
           {"judgments", std::move(judgments_json)}};
    if (deciding_item) j["deciding_item"] = *deciding_item;
    if (error) j["error"] = *error;
    return j;
}

DetectionVerdict DetectionVerdict::from_json(const json& j) {
    DetectionVerdict verdict;
    verdict.code_ref = j.at("code_ref").get<std::string>();
    verdict.label = j.at("label").get<std::string>() == "vulnerable" ? Label::vulnerable
                                                                     : Label::non_vulnerable;
    verdict.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    if (j.contains("deciding_item")) verdict.deciding_item = j["deciding_item"].get<std::string>();
    if (j.contains("error")) verdict.error = j["error"].get<std::string>();
    for (const auto& judgment : j.at("judgments"))
        verdict.judgments.push_back(ItemJudgment::from_json(judgment));
    return verdict;
}

Label derive_label(const std::vector<ItemJudgment>& judgments,
                   std::optional<std::string>* deciding_item) {
    if (deciding_item) deciding_item->reset();
    for (const auto& judgment : judgments) {
        if (judgment.cause_present == Ternary::yes && judgment.fix_applied == Ternary::no) {
            if (deciding_item) *deciding_item = judgment.item_id;
            return Label::vulnerable;
        }
    }
    return Label::non_vulnerable;
}

namespace {

ChatRequest single_user_request(const std::string& prompt, const DetectionOptions& options) {
    ChatRequest req;
    req.messages = {{Role::user, prompt}};
    req.model_name = options.model;
    req.temperature = options.temperature;
    req.max_output_tokens = options.max_output_tokens;
    return req;
}

/// cause/fix answers from the combined single-call mode.
std::pair<Ternary, Ternary> parse_combined(const std::string& text) {
    static const std::regex cause_re(R"(cause\s*:\s*(yes|no))", std::regex::icase);
    static const std::regex fix_re(R"(fix\s*:\s*(yes|no))", std::regex::icase);
    auto match = [&](const std::regex& re) {
        std::smatch m;
        if (!std::regex_search(text, m, re)) return Ternary::unparsed;
        std::string w = m[1].str();
        return (w == "yes" || w == "Yes" || w == "YES") ? Ternary::yes : Ternary::no;
    };
    return {match(cause_re), match(fix_re)};
}

const KnowledgeItem& item_by_id(const KnowledgeBase& kb, const std::string& item_id) {
    auto it = std::find_if(kb.items.begin(), kb.items.end(),
                           [&](const KnowledgeItem& item) { return item.item_id == item_id; });
    if (it == kb.items.end()) throw std::runtime_error("unknown knowledge item: " + item_id);
    return *it;
}

}  // namespace

DetectionVerdict detect_vul_rag(const std::string& code_ref, const std::string& code,
                                const IndexSet& indexes, const KnowledgeBase& kb,
                                Gateway& gateway, const DetectionOptions& options) {
    DetectionVerdict verdict;
    verdict.code_ref = code_ref;
    verdict.strategy = Strategy::vul_rag;

    RetrievalQuery query;
    query.code = code;
    query.semantics = extract_semantics(code, gateway, options.model, options.temperature,
                                        options.max_output_tokens);
    auto candidates = retrieve(query, indexes, options.top_n, options.final_k, options.bm25);

    for (const auto& candidate : candidates) {
        const KnowledgeItem& item = item_by_id(kb, candidate.item_id);
        std::string causes_text = render_causes(item.causes);
        std::string fix_text = render_fix(item.fix);

        ItemJudgment judgment;
        judgment.item_id = item.item_id;

        if (options.combined_prompt) {
            std::string prompt =
                prompts::find_causes_and_fixes_combined(code, causes_text, fix_text);
            ChatResponse resp = gateway.complete(single_user_request(prompt, options));
            judgment.transcripts.push_back({prompt, resp.text});
            std::tie(judgment.cause_present, judgment.fix_applied) = parse_combined(resp.text);
        } else {
            std::string cause_prompt = prompts::find_causes(code, causes_text, fix_text);
            ChatResponse cause_resp = gateway.complete(single_user_request(cause_prompt, options));
            judgment.transcripts.push_back({cause_prompt, cause_resp.text});
            judgment.cause_present = parse_yes_no(cause_resp.text);

            // the fix prompt is only worth issuing once the cause matched
            if (judgment.cause_present == Ternary::yes) {
                std::string fix_prompt = prompts::find_fixes(code, causes_text, fix_text);
                ChatResponse fix_resp = gateway.complete(single_user_request(fix_prompt, options));
                judgment.transcripts.push_back({fix_prompt, fix_resp.text});
                judgment.fix_applied = parse_yes_no(fix_resp.text);
            }
        }

        // conservative scoring of unparsed answers (logged in the transcript)
        if (judgment.cause_present == Ternary::unparsed) judgment.cause_present = Ternary::no;
        if (judgment.cause_present == Ternary::yes && judgment.fix_applied == Ternary::unparsed)
            judgment.fix_applied = Ternary::yes;

        verdict.judgments.push_back(std::move(judgment));
        if (verdict.judgments.back().cause_present == Ternary::yes &&
            verdict.judgments.back().fix_applied == Ternary::no)
            break;  // early exit: vulnerable
    }

    verdict.label = derive_label(verdict.judgments, &verdict.deciding_item);
    return verdict;
}

DetectionVerdict detect_baseline(const std::string& code_ref, const std::string& code,
                                 Strategy strategy, Gateway& gateway,
                                 const DetectionOptions& options, const IndexSet* indexes,
                                 const KnowledgeBase* kb) {
    DetectionVerdict verdict;
    verdict.code_ref = code_ref;
    verdict.strategy = strategy;

    std::string prompt;
    switch (strategy) {
        case Strategy::basic:
            prompt = prompts::basic(code);
            break;
        case Strategy::cot1:
            prompt = prompts::cot1(code);
            break;
        case Strategy::cot2:
            prompt = prompts::cot2(code);
            break;
        case Strategy::cwe_enhanced:
            if (options.cwe_description.empty())
                throw std::runtime_error("cwe_enhanced strategy requires a CWE description");
            prompt = prompts::cwe_enhanced(code, options.cwe_description);
            break;
        case Strategy::code_rag: {
            if (!indexes || !kb)
                throw std::runtime_error("code_rag strategy requires a code corpus index");
            auto ranking =
                retrieve_per_element(preprocess(code), indexes->code,
                                     std::max(1, options.code_rag_snippets), options.bm25);
            std::string retrieved;
            for (const auto& [item_id, score] : ranking) {
                if (!retrieved.empty()) retrieved += "\n\n";
                retrieved += item_by_id(*kb, item_id).source_vulnerable_code;
            }
            if (retrieved.empty()) retrieved = "(no similar code found)";
            prompt = prompts::code_rag(code, retrieved);
            break;
        }
        case Strategy::vul_rag:
            throw std::runtime_error("vul_rag is not a baseline strategy");
    }

    ChatResponse resp = gateway.complete(single_user_request(prompt, options));
    ItemJudgment judgment;
    judgment.item_id = "baseline";
    judgment.transcripts.push_back({prompt, resp.text});
    Ternary answer = parse_yes_no(resp.text);
    if (answer == Ternary::unparsed)
        throw std::runtime_error("unparseable baseline answer for " + code_ref + ": " +
                                 resp.text);
    judgment.cause_present = answer;
    judgment.fix_applied = (answer == Ternary::yes) ? Ternary::no : Ternary::unparsed;
    verdict.judgments.push_back(std::move(judgment));
    verdict.label = (answer == Ternary::yes) ? Label::vulnerable : Label::non_vulnerable;
    if (verdict.label == Label::vulnerable) verdict.deciding_item = "baseline";
    return verdict;
}

std::vector<DetectionVerdict> run_batch(const std::vector<BatchInput>& codes, Strategy strategy,
                                        const IndexSet* indexes, const KnowledgeBase* kb,
                                        Gateway& gateway, const DetectionOptions& options,
                                        const std::filesystem::path& out_path,
                                        const json& config_header, int jobs) {
    std::map<std::string, DetectionVerdict> done;
    bool file_started = false;
    if (!out_path.empty() && std::filesystem::exists(out_path)) {
        auto file = read_jsonl(out_path);
        for (const auto& rec : file.records) {
            DetectionVerdict v = DetectionVerdict::from_json(rec);
            done[v.code_ref] = std::move(v);
        }
        file_started = true;
    }

    std::vector<const BatchInput*> pending;
    for (const auto& input : codes) {
        if (!done.count(input.code_ref)) pending.push_back(&input);
    }

    std::mutex io_mutex;
    auto persist = [&](const DetectionVerdict& verdict) {
        std::lock_guard<std::mutex> lock(io_mutex);
        if (out_path.empty()) return;
        if (!file_started) {
            write_jsonl(out_path, make_header(config_header), {});
            file_started = true;
        }
        append_jsonl(out_path, verdict.to_json());
    };

    auto detect_one = [&](const BatchInput& input) {
        DetectionVerdict verdict;
        try {
            if (strategy == Strategy::vul_rag) {
                verdict = detect_vul_rag(input.code_ref, input.code, *indexes, *kb, gateway,
                                         options);
            } else {
                verdict = detect_baseline(input.code_ref, input.code, strategy, gateway, options,
                                          indexes, kb);
            }
        } catch (const std::exception& e) {
            verdict = DetectionVerdict{};
            verdict.code_ref = input.code_ref;
            verdict.strategy = strategy;
            verdict.error = e.what();
        }
        persist(verdict);
        return verdict;
    };

    std::map<std::string, DetectionVerdict> fresh;
    if (jobs <= 1) {
        for (const auto* input : pending) fresh[input->code_ref] = detect_one(*input);
    } else {
        std::mutex result_mutex;
        std::vector<std::thread> workers;
        std::atomic<size_t> next{0};
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                while (true) {
                    size_t i = next.fetch_add(1);
                    if (i >= pending.size()) return;
                    DetectionVerdict verdict = detect_one(*pending[i]);
                    std::lock_guard<std::mutex> lock(result_mutex);
                    fresh[verdict.code_ref] = std::move(verdict);
                }
            });
        }
        for (auto& w : workers) w.join();
    }

    std::vector<DetectionVerdict> out;
    for (const auto& input : codes) {
        if (auto it = done.find(input.code_ref); it != done.end()) {
            out.push_back(it->second);
        } else {
            out.push_back(fresh.at(input.code_ref));
        }
    }
    return out;
}

}  // namespace vulrag
