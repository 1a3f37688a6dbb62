#include "vulrag/prompts.hpp"

namespace vulrag::prompts {

namespace {
std::string str(std::string_view v) { return std::string(v); }
}

std::string purpose_extraction(std::string_view code) {
    return str(code) +
           "\nWhat is the purpose of the function in the above code snippet? Please summarize "
           "the answer in one sentence with the following format: \"Function purpose:\".";
}

std::string behavior_extraction(std::string_view code) {
    return str(code) +
           "\nPlease summarize the functions of the above code snippet in the list format "
           "without any other explanation: \"The functions of the code snippet are: 1. 2. "
           "3...\"";
}

std::string extraction_round1(std::string_view cve_id, std::string_view vulnerable_code,
                              std::string_view cve_description, std::string_view patch_diff,
                              std::string_view patched_code) {
    return "This is a code snippet with a vulnerability " + str(cve_id) + ":\n" +
           str(vulnerable_code) + "\nThe vulnerability is described as follows:\n" +
           str(cve_description) + "\nThe correct way to fix it is by\n" + str(patch_diff) +
           "\nThe code after modification is as follows:\n" + str(patched_code) +
           "\nWhy is the above modification necessary?";
}

std::string extraction_round2(std::string_view example1, std::string_view example2) {
    return "I want you to act as a vulnerability detection expert and organize vulnerability "
           "knowledge based on the above vulnerability repair information. Please summarize the "
           "generalizable specific behavior of the code that leads to the vulnerability and the "
           "specific solution to fix it. Format your findings in JSON.\n"
           "Here are some examples to guide you on the level of detail expected in your "
           "extraction:\n" +
           str(example1) + "\n" + str(example2);
}

std::string reformat_reminder() {
    return "Please reformat your findings as a single JSON object with exactly these keys: "
           "triggering_action, abstract_description, detailed_description, solution.";
}

std::string abstraction_guidelines() {
    return "1. Abstracting Method Invocations: replace concrete method invocations with "
           "detailed function identifiers or parameters (e.g. mutex_lock(&dmxdev->mutex)) by "
           "generalized descriptions of the action (e.g. \"employing a locking mechanism akin "
           "to mutex_lock()\").\n"
           "2. Abstracting Variable Names and Types: replace concrete variable names or types "
           "(e.g. \"without &dev->ref initialization\") by more general descriptions (e.g. "
           "\"without proper reference counter initialization\").\n"
           "Return the abstracted knowledge as a single JSON object with exactly these keys: "
           "triggering_action, abstract_description, detailed_description, solution.";
}

std::string knowledge_abstraction(std::string_view knowledge_json) {
    return "With the detailed vulnerability knowledge extracted from the previous stage, your "
           "task is to abstract and generalize this knowledge to enhance its applicability "
           "across different scenarios. Please adhere to the following guidelines and examples "
           "provided:\n" +
           abstraction_guidelines() + "\n\n### Vulnerability Knowledge:\n" + str(knowledge_json);
}

std::string find_causes(std::string_view code, std::string_view causes_text,
                        std::string_view fix_text) {
    return "Given the following code and related vulnerability causes, please detect if there "
           "is a vulnerability caused in the code.\n" +
           str(code) + "\nIn a similar code scenario, the following vulnerabilities have been "
           "found:\n" +
           str(causes_text) + "\n" + str(fix_text) +
           "\nPlease use your own knowledge of vulnerabilities and the above vulnerability "
           "knowledge to detect whether there is a vulnerability in the code.";
}

std::string find_fixes(std::string_view code, std::string_view causes_text,
                       std::string_view fix_text) {
    return "Given the following code and related vulnerability fixing solutions, please detect "
           "if there is a vulnerability in the code.\n" +
           str(code) + "\nIn a similar code scenario, the following vulnerabilities have been "
           "found:\n" +
           str(causes_text) + "\n" + str(fix_text) +
           "\nPlease use your own knowledge of vulnerabilities and the above vulnerability "
           "knowledge to detect whether there is a corresponding fixing solution in the code.";
}

std::string find_causes_and_fixes_combined(std::string_view code, std::string_view causes_text,
                                           std::string_view fix_text) {
    return "Given the following code and related vulnerability knowledge, please detect if "
           "there is a vulnerability in the code.\n" +
           str(code) + "\nIn a similar code scenario, the following vulnerabilities have been "
           "found:\n" +
           str(causes_text) + "\n" + str(fix_text) +
           "\nPlease answer two questions. First: does the code exhibit the same vulnerability "
           "cause? Second: does the code apply the corresponding fixing solution? Answer each "
           "with YES or NO on its own line, in the form \"cause: YES|NO\" and \"fix: YES|NO\".";
}

std::string basic(std::string_view code) {
    return "Is this code vulnerable? Answer in Yes or No.\n\n### Code Snippet:\n" + str(code);
}

std::string cot1(std::string_view code) {
    return "I want you to act as a vulnerability detection expert. Initially, you need to "
           "explain the behavior of the code. Subsequently, you need to determine whether the "
           "code is vulnerable. Answer in YES or NO.\n\n### Code Snippet:\n" +
           str(code);
}

std::string cot2(std::string_view code) {
    return "I want you to act as a vulnerability detection system. Initially, you need to "
           "explain the behavior of the given code. Subsequently, analyze whether there are "
           "potential root causes that could result in vulnerabilities. Based on above "
           "analysis, determine whether the code is vulnerable, and conclude your answer with "
           "either YES or NO.\n\n### Code Snippet:\n" +
           str(code);
}

std::string cwe_enhanced(std::string_view code, std::string_view cwe_description) {
    return "I want you to act as a vulnerability detection system. I will provide you with a "
           "code snippet and a CWE description. Please analyze the code to determine if it "
           "contains the vulnerability described in the CWE. Answer in YES or NO.\n\n### Code "
           "Snippet:\n" +
           str(code) + "\n\n### CWE Description:\n" + str(cwe_description);
}

std::string code_rag(std::string_view code, std::string_view retrieved_code) {
    return "I want you to act as a vulnerability detection system. The following similar code "
           "snippets were retrieved from known historical vulnerabilities:\n\n### Retrieved "
           "Code:\n" +
           str(retrieved_code) +
           "\n\nIs this code vulnerable? Answer in Yes or No.\n\n### Code Snippet:\n" + str(code);
}

}  // namespace vulrag::prompts
