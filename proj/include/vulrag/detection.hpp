#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vulrag/gateway.hpp"
#include "vulrag/knowledge.hpp"
#include "vulrag/retrieval.hpp"

namespace vulrag {

enum class Ternary { yes, no, unparsed };

std::string to_string(Ternary t);
Ternary ternary_from_string(const std::string& s);

/// Final-answer scan: the last standalone case-insensitive yes/no wins;
/// a sentence holding both, or no occurrence at all, is unparsed.
Ternary parse_yes_no(const std::string& text);

struct Transcript {
    std::string prompt;
    std::string response;
};

struct ItemJudgment {
    std::string item_id;
    Ternary cause_present = Ternary::unparsed;
    Ternary fix_applied = Ternary::unparsed;
    std::vector<Transcript> transcripts;

    json to_json() const;
    static ItemJudgment from_json(const json& j);
};

enum class Strategy { vul_rag, basic, cot1, cot2, cwe_enhanced, code_rag };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

enum class Label { vulnerable, non_vulnerable };

struct DetectionVerdict {
    std::string code_ref;
    Label label = Label::non_vulnerable;
    std::optional<std::string> deciding_item;
    std::vector<ItemJudgment> judgments;
    Strategy strategy = Strategy::vul_rag;
    std::optional<std::string> error;  // gateway failure; excluded from metrics

    json to_json() const;
    static DetectionVerdict from_json(const json& j);
};

/// The label the judgments imply under the decision rule of the iterative
/// loop: first item with cause=yes and fix=no wins; exhaustion is benign.
/// Unparsed cause counts as no; unparsed fix after cause=yes counts as
/// applied.
Label derive_label(const std::vector<ItemJudgment>& judgments,
                   std::optional<std::string>* deciding_item = nullptr);

struct DetectionOptions {
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    int top_n = 10;
    int final_k = 10;
    Bm25Params bm25;
    bool combined_prompt = false;  // single-call cause+fix mode
    std::string cwe_description;   // cwe_enhanced strategy
    int code_rag_snippets = 1;     // training snippets spliced into the prompt
};

DetectionVerdict detect_vul_rag(const std::string& code_ref, const std::string& code,
                                const IndexSet& indexes, const KnowledgeBase& kb,
                                Gateway& gateway, const DetectionOptions& options);

DetectionVerdict detect_baseline(const std::string& code_ref, const std::string& code,
                                 Strategy strategy, Gateway& gateway,
                                 const DetectionOptions& options,
                                 const IndexSet* indexes = nullptr,
                                 const KnowledgeBase* kb = nullptr);

struct BatchInput {
    std::string code_ref;
    std::string code;
};

/// Independent per-code detection; verdicts appended incrementally to
/// out_path and already-persisted code_refs skipped on rerun.
std::vector<DetectionVerdict> run_batch(const std::vector<BatchInput>& codes, Strategy strategy,
                                        const IndexSet* indexes, const KnowledgeBase* kb,
                                        Gateway& gateway, const DetectionOptions& options,
                                        const std::filesystem::path& out_path,
                                        const json& config_header, int jobs = 1);

}  // namespace vulrag
