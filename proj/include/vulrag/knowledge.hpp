#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "vulrag/corpus.hpp"
#include "vulrag/gateway.hpp"

namespace vulrag {

struct FunctionalSemantics {
    std::string abstract_purpose;
    std::vector<std::string> detailed_behavior;

    json to_json() const;
    static FunctionalSemantics from_json(const json& j);
};

struct VulnerabilityCauses {
    std::string triggering_action;
    std::string abstract_description;
    std::string detailed_description;
};

struct FixingSolution {
    std::string solution_description;
};

/// The seven-element vulnerability knowledge record with provenance.
struct KnowledgeItem {
    std::string item_id;
    std::string source_cve_id;
    std::string source_instance_id;
    FunctionalSemantics semantics;
    VulnerabilityCauses causes;
    FixingSolution fix;
    std::string source_vulnerable_code;  // kept for the code-similarity field
    bool abstraction_applied = false;

    json to_json() const;
    static KnowledgeItem from_json(const json& j);
};

struct KnowledgeBase {
    std::vector<KnowledgeItem> items;
    int schema_version = 1;

    void save(const std::filesystem::path& path, const json& config) const;
    static KnowledgeBase load(const std::filesystem::path& path);
};

class KnowledgeError : public std::runtime_error {
public:
    explicit KnowledgeError(const std::string& what) : std::runtime_error(what) {}
};

struct Demonstrations {
    std::string example1;
    std::string example2;

    static Demonstrations load(const std::filesystem::path& path);
};

/// Renders causes/fix as the prompt-visible knowledge text.
std::string render_causes(const VulnerabilityCauses& causes);
std::string render_fix(const FixingSolution& fix);

/// Two gateway calls (purpose, behavior) parsed by the labeled-prefix rules.
FunctionalSemantics extract_semantics(const std::string& code, Gateway& gateway,
                                      const std::string& model, double temperature,
                                      int max_output_tokens);

/// Two-round causes/fix extraction with two demonstration shots; one
/// reformat retry on a structured-output parse failure.
std::pair<VulnerabilityCauses, FixingSolution> extract_causes_and_fix(
    const VulnInstance& instance, Gateway& gateway, const Demonstrations& demos,
    const std::string& model, double temperature, int max_output_tokens);

/// Rewrites causes/fix per the abstraction guidelines; semantics and source
/// code stay untouched. Precondition: abstraction_applied is false.
KnowledgeItem abstract_item(const KnowledgeItem& item, Gateway& gateway,
                            const std::string& model, double temperature,
                            int max_output_tokens);

struct KbBuildOptions {
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    bool apply_abstraction = true;
    double failure_budget = 0.5;   // abort above this failure fraction
    std::filesystem::path out_path;  // persisted incrementally when set
    json config_header;
    std::set<std::string> test_cve_ids;  // leakage guard
};

struct KbBuildResult {
    KnowledgeBase kb;
    std::vector<std::string> failures;  // "<instance_id>: <why>"
    size_t skipped_resume = 0;
};

/// Resumable build: instances whose item is already persisted are skipped.
KbBuildResult build_knowledge_base(const std::vector<VulnInstance>& train, Gateway& gateway,
                                   const Demonstrations& demos, const KbBuildOptions& options);

// response parsers, exposed for tests
std::string parse_purpose_response(const std::string& text);
std::vector<std::string> parse_behavior_response(const std::string& text);
std::optional<json> extract_json_object(const std::string& text);
std::optional<std::pair<VulnerabilityCauses, FixingSolution>> parse_knowledge_json(
    const std::string& text);

}  // namespace vulrag
