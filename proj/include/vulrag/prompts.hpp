#pragma once

#include <string>
#include <string_view>

namespace vulrag::prompts {

/// Template assembly for every prompt the pipeline issues. Golden-file
/// tests pin the exact bytes, so any edit here must update the fixtures.

// knowledge extraction
std::string purpose_extraction(std::string_view code);
std::string behavior_extraction(std::string_view code);
std::string extraction_round1(std::string_view cve_id, std::string_view vulnerable_code,
                              std::string_view cve_description, std::string_view patch_diff,
                              std::string_view patched_code);
std::string extraction_round2(std::string_view example1, std::string_view example2);
std::string reformat_reminder();

// knowledge abstraction
std::string abstraction_guidelines();
std::string knowledge_abstraction(std::string_view knowledge_json);

// detection (knowledge-augmented)
std::string find_causes(std::string_view code, std::string_view causes_text,
                        std::string_view fix_text);
std::string find_fixes(std::string_view code, std::string_view causes_text,
                       std::string_view fix_text);
std::string find_causes_and_fixes_combined(std::string_view code, std::string_view causes_text,
                                           std::string_view fix_text);

// baselines
std::string basic(std::string_view code);
std::string cot1(std::string_view code);
std::string cot2(std::string_view code);
std::string cwe_enhanced(std::string_view code, std::string_view cwe_description);
std::string code_rag(std::string_view code, std::string_view retrieved_code);

}  // namespace vulrag::prompts
